"""Continuous hovering spaceship.

Height ``s`` is measured downward from the ceiling (``s = 0``) to the
ground (``s = s_max``, failure).  The ship falls with ``g0 + tanh(0.75 s) g``
and thrust ``a`` pushes it back up; a new thrust is chosen once per control
interval ``1/omega``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from viability.dynamics.base import System, TransitionOutcome, as_vector
from viability.grids import AxisGrid, ProductGrid

SUBSTEPS = 20


@dataclass(frozen=True)
class HovershipParams:
    g0: float = 0.1
    g: float = 1.0
    a_max: float = 0.5
    s_max: float = 2.0
    omega: float = 1.0

    def __post_init__(self):
        for name in ("g0", "g", "a_max", "s_max", "omega"):
            if not getattr(self, name) > 0:
                raise ValueError(f"hovership parameter {name} must be positive")
        if not self.a_max < self.g0 + self.g:
            raise ValueError("a_max must be below g0 + g, otherwise every state is viable")


def velocity(s, a, p: HovershipParams):
    return p.g0 + np.tanh(0.75 * s) * p.g - a


class Hovership(System):
    name = "hovership"

    def __init__(self, params: HovershipParams | None = None, grid_cells=(80, 40)):
        self.params = params if params is not None else HovershipParams()
        self.grid_cells = tuple(grid_cells)

    def step(self, state, action) -> TransitionOutcome:
        p = self.params
        s = float(as_vector(state, "state")[0])
        a = float(as_vector(action, "action")[0])
        if not 0.0 <= a <= p.a_max:
            raise ValueError(f"thrust {a} outside [0, {p.a_max}]")
        if s >= p.s_max:
            return TransitionOutcome(np.array([s]), True, "already failed")
        s = max(s, 0.0)
        h = 1.0 / (p.omega * SUBSTEPS)
        for _ in range(SUBSTEPS):
            k1 = velocity(s, a, p)
            k2 = velocity(s + 0.5 * h * k1, a, p)
            k3 = velocity(s + 0.5 * h * k2, a, p)
            k4 = velocity(s + h * k3, a, p)
            s = s + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            # the ceiling stops the ship
            s = max(s, 0.0)
            if s >= p.s_max:
                return TransitionOutcome(np.array([s]), True, "crashed")
        return TransitionOutcome(np.array([s]), False)

    def in_failure_set(self, state) -> bool:
        return float(as_vector(state, "state")[0]) >= self.params.s_max

    def default_grid(self) -> ProductGrid:
        ns, na = self.grid_cells
        p = self.params
        return ProductGrid((AxisGrid(0.0, p.s_max, ns),), (AxisGrid(0.0, p.a_max, na),))


def hovership_step(s, a, params: HovershipParams | None = None) -> TransitionOutcome:
    return Hovership(params).step(s, a)
