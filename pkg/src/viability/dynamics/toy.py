"""Finite deterministic systems, including the five-state spaceship.

In the spaceship grid world, states 1..5 are heights from the top (1) to
the ground (5, crashed).  The actions are 0 (no thrust, fall), 1 (low
thrust) and 2 (high thrust).  Gravity gets stronger near the ground, so the
thrust that holds the ship at 2 only slows its fall at 3, and at 4 nothing
can stop the crash.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from viability.dynamics.base import System, TransitionOutcome, as_vector
from viability.grids import AxisGrid, ProductGrid

STATES = (1, 2, 3, 4, 5)
ACTIONS = (0, 1, 2)

# (state, action) -> successor
DEFAULT_TABLE = {
    (1, 0): 2, (1, 1): 1, (1, 2): 1,
    (2, 0): 3, (2, 1): 2, (2, 2): 1,
    (3, 0): 4, (3, 1): 4, (3, 2): 3,
    (4, 0): 5, (4, 1): 5, (4, 2): 5,
    (5, 0): 5, (5, 1): 5, (5, 2): 5,
}


@dataclass(frozen=True)
class ToyTable:
    transitions: dict = field(default_factory=lambda: dict(DEFAULT_TABLE))
    failure_states: frozenset = frozenset({5})

    def __post_init__(self):
        if set(self.transitions) != {(s, a) for s in STATES for a in ACTIONS}:
            raise ValueError("transition table must have exactly one entry per (state, action)")
        for key, nxt in self.transitions.items():
            if nxt not in STATES:
                raise ValueError(f"transition {key} -> {nxt} is not a valid state")


class FiniteSystem(System):
    """Table-driven system with states ``1..n_states`` and actions ``0..n_actions-1``.

    ``successors[s - 1, a]`` is the label of the next state.  Stepping from a
    failure state reports failure again.
    """

    name = "finite"
    discrete = True

    def __init__(self, successors, failure_states):
        succ = np.asarray(successors, dtype=int)
        if succ.ndim != 2 or succ.min() < 1 or succ.max() > succ.shape[0]:
            raise ValueError("successors must be an (n_states, n_actions) table of state labels")
        self.successors = succ
        self.failure_states = frozenset(int(s) for s in failure_states)
        if not self.failure_states <= set(range(1, succ.shape[0] + 1)):
            raise ValueError("failure states must be valid state labels")

    @property
    def n_states(self) -> int:
        return self.successors.shape[0]

    @property
    def n_actions(self) -> int:
        return self.successors.shape[1]

    def step(self, state, action) -> TransitionOutcome:
        s = _as_label(state, 1, self.n_states, "state")
        a = _as_label(action, 0, self.n_actions - 1, "action")
        if s in self.failure_states:
            return TransitionOutcome(np.array([float(s)]), True, "already failed")
        nxt = int(self.successors[s - 1, a])
        failed = nxt in self.failure_states
        return TransitionOutcome(np.array([float(nxt)]), failed, "crashed" if failed else "")

    def in_failure_set(self, state) -> bool:
        return _as_label(state, 1, self.n_states, "state") in self.failure_states

    def default_grid(self) -> ProductGrid:
        # unit cells centered on the integer labels
        return ProductGrid((AxisGrid(0.5, self.n_states + 0.5, self.n_states),),
                           (AxisGrid(-0.5, self.n_actions - 0.5, self.n_actions),), discrete=True)


class ToySystem(FiniteSystem):
    name = "toy"

    def __init__(self, table: ToyTable | None = None):
        self.table = table if table is not None else ToyTable()
        succ = [[self.table.transitions[(s, a)] for a in ACTIONS] for s in STATES]
        super().__init__(succ, self.table.failure_states)


def toy_step(s, a, table: ToyTable | None = None) -> TransitionOutcome:
    return ToySystem(table).step(s, a)


def _as_label(x, lo, hi, name):
    v = as_vector(x, name)
    if v.shape != (1,) or v[0] != round(v[0]) or not lo <= v[0] <= hi:
        raise ValueError(f"invalid {name} {x!r}; expected an integer in [{lo}, {hi}]")
    return int(round(v[0]))
