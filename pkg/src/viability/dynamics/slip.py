"""Spring-loaded inverted pendulum, sampled apex to apex.

The state is the apex potential energy normalized by the total energy,
``s = g y / (xdot**2 / 2 + g y)``; the action is the landing angle of
attack ``alpha`` of the leg, measured from the vertical (foot ahead of the
hip for ``alpha > 0``).  Flight phases are ballistic and solved in closed
form; stance is integrated numerically in world coordinates with the foot
pinned at its touchdown position.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from viability.dynamics.base import DynamicsError, System, TransitionOutcome, as_vector
from viability.grids import AxisGrid, ProductGrid

RTOL = 1e-9
ATOL = 1e-9
EVENT_TOL = 1e-10
MAX_STANCE_TIME = 5.0


@dataclass(frozen=True)
class SlipParams:
    g: float = 9.81
    m: float = 80.0
    k: float = 8200.0
    l0: float = 1.0
    # total energy of the run (J); fixes the apex parameterization
    energy: float = 2500.0

    def __post_init__(self):
        for name in ("g", "m", "k", "l0", "energy"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"SLIP parameter {name} must be positive and finite")


def apex_from_state(s, p: SlipParams) -> np.ndarray:
    """Full apex state ``[x, y, xdot, ydot]`` with ``x = 0``."""
    y = s * p.energy / (p.m * p.g)
    xdot = np.sqrt(max(2.0 * (1.0 - s) * p.energy / p.m, 0.0))
    return np.array([0.0, y, xdot, 0.0])


def state_from_apex(x, p: SlipParams) -> float:
    pot = p.g * x[1]
    return pot / (0.5 * x[2] ** 2 + pot)


def total_energy(x, p: SlipParams, foot=None) -> float:
    """Mechanical energy; includes spring energy when ``foot`` is given."""
    e = p.m * p.g * x[1] + 0.5 * p.m * (x[2] ** 2 + x[3] ** 2)
    if foot is not None:
        l = np.hypot(x[0] - foot[0], x[1] - foot[1])
        e += 0.5 * p.k * (p.l0 - l) ** 2
    return float(e)


def _stance_rhs(p, foot_x):
    k_m, g, l0 = p.k / p.m, p.g, p.l0

    def rhs(t, x):
        dx, dy = x[0] - foot_x, x[1]
        l = np.sqrt(dx * dx + dy * dy)
        f = k_m * (l0 - l) / l
        return [x[2], x[3], f * dx, f * dy - g]

    return rhs


def _refine_event(sol, fn, t_lo, t_hi):
    """Bisect the dense output until ``|fn| <= EVENT_TOL`` or t stalls."""
    f_lo = fn(sol(t_lo))
    for _ in range(200):
        t_mid = 0.5 * (t_lo + t_hi)
        f_mid = fn(sol(t_mid))
        if abs(f_mid) <= EVENT_TOL or t_mid in (t_lo, t_hi):
            return t_mid
        if np.sign(f_mid) == np.sign(f_lo):
            t_lo, f_lo = t_mid, f_mid
        else:
            t_hi = t_mid
    return 0.5 * (t_lo + t_hi)


class Slip(System):
    name = "slip"

    def __init__(self, params: SlipParams | None = None, grid=None):
        self.params = params if params is not None else SlipParams()
        self._grid = grid

    def step(self, state, action) -> TransitionOutcome:
        return self.simulate(state, action)[0]

    def simulate(self, state, action):
        """Step and also return diagnostics (phase states, energies)."""
        p = self.params
        s = float(as_vector(state, "state")[0])
        alpha = float(as_vector(action, "action")[0])
        if not 0.0 < s <= 1.0:
            raise ValueError(f"SLIP state must lie in (0, 1], got {s}")
        info = {}
        apex = apex_from_state(s, p)
        info["apex"] = apex
        info["energy_in"] = total_energy(apex, p)

        # flight: fall until the leg tip reaches the ground
        y_td = p.l0 * np.cos(alpha)
        drop = apex[1] - y_td
        if drop < 0:
            return TransitionOutcome(np.array([s]), True, "infeasible"), info
        t_fl = np.sqrt(2.0 * drop / p.g)
        x_td = np.array([apex[2] * t_fl, y_td, apex[2], -p.g * t_fl])
        foot_x = x_td[0] + p.l0 * np.sin(alpha)
        info["touchdown"] = x_td
        info["foot_x"] = foot_x

        def leg_excess(x):
            return np.hypot(x[0] - foot_x, x[1]) - p.l0

        # stance: spring pushes radially from the pinned foot
        def liftoff(t, x):
            return leg_excess(x)
        liftoff.terminal = True
        liftoff.direction = 1

        def fall(t, x):
            return x[1]
        fall.terminal = True
        fall.direction = -1

        # the l = l0 root at t = 0 (touchdown itself) is filtered out below
        sol = solve_ivp(_stance_rhs(p, foot_x), (0.0, MAX_STANCE_TIME), x_td,
                        method="DOP853", rtol=RTOL, atol=ATOL,
                        events=(liftoff, fall), dense_output=True)
        if sol.status == -1:
            raise DynamicsError(f"stance integration failed at s={s}, alpha={alpha}: {sol.message}")
        t_lo_events = [t for t in sol.t_events[0] if t > 1e-9]
        t_fall = sol.t_events[1]
        if len(t_fall) and (not t_lo_events or t_fall[0] <= t_lo_events[0]):
            return TransitionOutcome(np.array([s]), True, "fell"), info
        if not t_lo_events:
            return TransitionOutcome(np.array([s]), True, "no liftoff"), info
        t_event = t_lo_events[0]
        # tighten the event time on the interpolant
        h = 1e-6
        t_event = _refine_event(sol.sol, leg_excess, max(t_event - h, 1e-9), min(t_event + h, sol.t[-1]))
        x_lo = sol.sol(t_event)
        info["liftoff"] = x_lo
        info["stance_time"] = t_event
        info["event_residual"] = abs(leg_excess(x_lo))

        if x_lo[2] <= 0:
            return TransitionOutcome(np.array([s]), True, "reversed"), info
        if x_lo[3] <= 0:
            return TransitionOutcome(np.array([s]), True, "no apex"), info
        # flight: rise to the next apex
        t_up = x_lo[3] / p.g
        apex_next = np.array([x_lo[0] + x_lo[2] * t_up, x_lo[1] + 0.5 * x_lo[3] ** 2 / p.g, x_lo[2], 0.0])
        info["apex_next"] = apex_next
        info["energy_out"] = total_energy(apex_next, p)
        s_next = state_from_apex(apex_next, p)
        return TransitionOutcome(np.array([s_next]), False), info

    def in_failure_set(self, state) -> bool:
        # failures are detected on the continuous trajectory, never at apex
        return False

    def default_grid(self) -> ProductGrid:
        if self._grid is not None:
            return self._grid
        return ProductGrid((AxisGrid(0.0, 1.0, 50),), (AxisGrid(0.0, np.pi / 2, 50),))


def slip_step(s, a, params: SlipParams | None = None) -> TransitionOutcome:
    return Slip(params).step(s, a)
