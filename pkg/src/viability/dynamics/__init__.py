"""Transition maps: toy grid world, continuous hovership, SLIP."""

from viability.dynamics.base import DynamicsError, System, TransitionOutcome
from viability.dynamics.hovership import Hovership, HovershipParams, hovership_step
from viability.dynamics.slip import Slip, SlipParams, apex_from_state, slip_step, state_from_apex
from viability.dynamics.toy import FiniteSystem, ToySystem, ToyTable, toy_step

__all__ = [
    "DynamicsError", "System", "TransitionOutcome",
    "Hovership", "HovershipParams", "hovership_step",
    "Slip", "SlipParams", "apex_from_state", "slip_step", "state_from_apex",
    "FiniteSystem", "ToySystem", "ToyTable", "toy_step",
]
