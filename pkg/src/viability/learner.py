"""Active sampling of a black-box system to learn its safety measure.

:func:`learn` runs the GP-based loop: an optimistic set supplies measure
targets, a cautious set restricts where the system is steered, and within
the cautious set the most uncertain action is sampled.  :func:`tabular_learn`
is the exact table update for finite systems, useful for checking
convergence on unviable pairs.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from viability.gp import GpPosterior, KernelParams, exceedance_probability
from viability.grids import (IndicatorField, ProductGrid, ScalarField,
                             measure_field, slice_counts, slice_measure)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Ramp:
    start: float
    end: float

    def at(self, frac: float) -> float:
        return self.start + (self.end - self.start) * frac


@dataclass(frozen=True)
class ThresholdSchedule:
    """Confidence thresholds ramped linearly over ``ramp_steps`` iterations."""

    gamma_opt: Ramp
    gamma_caut: Ramp
    lambda_caut: Ramp
    ramp_steps: int

    def __post_init__(self):
        for name in ("gamma_opt", "gamma_caut", "lambda_caut"):
            r = getattr(self, name)
            if not isinstance(r, Ramp):
                r = Ramp(*r)
                object.__setattr__(self, name, r)
            if r.end < r.start:
                raise ValueError(f"{name} must not decrease ({r.start} -> {r.end})")
        for name in ("gamma_opt", "gamma_caut"):
            r = getattr(self, name)
            if not (0 <= r.start <= 1 and 0 <= r.end <= 1):
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.lambda_caut.start < 0:
            raise ValueError("lambda_caut must be non-negative")
        # linear ramps: checking both ends covers every iteration
        if self.gamma_caut.start < self.gamma_opt.start or self.gamma_caut.end < self.gamma_opt.end:
            raise ValueError("gamma_caut must be >= gamma_opt at every iteration")
        if self.ramp_steps < 1:
            raise ValueError("ramp_steps must be positive")

    def at(self, iteration: int):
        """``(gamma_opt, gamma_caut, lambda_caut)`` in force at ``iteration``."""
        frac = min(max(iteration, 0) / max(self.ramp_steps - 1, 1), 1.0)
        return (self.gamma_opt.at(frac), self.gamma_caut.at(frac), self.lambda_caut.at(frac))

    @classmethod
    def constant(cls, gamma_opt, gamma_caut, lambda_caut):
        return cls(Ramp(gamma_opt, gamma_opt), Ramp(gamma_caut, gamma_caut),
                   Ramp(lambda_caut, lambda_caut), 1)

    def to_dict(self):
        return {"gamma_opt": [self.gamma_opt.start, self.gamma_opt.end],
                "gamma_caut": [self.gamma_caut.start, self.gamma_caut.end],
                "lambda_caut": [self.lambda_caut.start, self.lambda_caut.end],
                "ramp_steps": self.ramp_steps}


@dataclass(frozen=True)
class SetEstimate:
    """Posterior summaries and the derived sets on the working grid."""

    grid: ProductGrid
    mean: np.ndarray
    variance: np.ndarray
    prob_viable: np.ndarray
    prob_caut: np.ndarray
    opt: IndicatorField
    caut: IndicatorField
    thresholds: tuple

    def measure(self) -> ScalarField:
        """Estimated safety measure per state, from the optimistic set."""
        return measure_field(self.opt)


def sets_from_moments(grid, mean, variance, gamma_opt, gamma_caut, lambda_caut) -> SetEstimate:
    mean = np.asarray(mean, dtype=float).reshape(grid.shape)
    variance = np.asarray(variance, dtype=float).reshape(grid.shape)
    p0 = exceedance_probability(mean, variance, 0.0)
    pc = exceedance_probability(mean, variance, lambda_caut)
    opt = IndicatorField(grid, p0 > gamma_opt)
    caut = IndicatorField(grid, pc > gamma_caut)
    return SetEstimate(grid, mean, variance, p0, pc, opt, caut, (gamma_opt, gamma_caut, lambda_caut))


def compute_sets(posterior: GpPosterior, schedule: ThresholdSchedule, iteration: int,
                 grid: ProductGrid) -> SetEstimate:
    """Optimistic and cautious sets from the posterior at every grid cell."""
    mean, var = posterior.predict(grid.centers())
    return sets_from_moments(grid, mean, var, *schedule.at(iteration))


def estimate_lambda(q_opt: IndicatorField, s) -> float:
    """Safety measure estimate at state cell ``s``: slice measure of the optimistic set."""
    return slice_measure(q_opt, s)


def select_action(s, caut: IndicatorField, variance, prob_caut) -> int:
    """Flat action index to sample at state cell ``s``.

    Inside a non-empty cautious slice the most uncertain action wins;
    otherwise the action most likely to be cautious.  Ties go to the lowest
    index (``np.argmax`` semantics).
    """
    grid = caut.grid
    s = (s,) if np.ndim(s) == 0 else tuple(s)
    safe = caut.values[s].ravel()
    var = np.asarray(variance).reshape(grid.shape)[s].ravel()
    if safe.any():
        return int(np.argmax(np.where(safe, var, -np.inf)))
    return int(np.argmax(np.asarray(prob_caut).reshape(grid.shape)[s].ravel()))


@dataclass
class LearnTrace:
    records: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)
    posterior: GpPosterior = None
    final_sets: SetEstimate = None

    @property
    def failure_count(self) -> int:
        return sum(1 for r in self.records if r["failed"])

    @property
    def failure_rate(self) -> float:
        return self.failure_count / len(self.records) if self.records else 0.0


@dataclass(frozen=True)
class GpConfig:
    kernel: KernelParams
    noise_variance: float
    prior_mean: object


def _on_slice(grid, s_idx, values):
    out = np.zeros(grid.shape)
    out[s_idx] = np.asarray(values).reshape(grid.action_shape)
    return out


def _reset_state(sets: SetEstimate, rng, s0):
    grid = sets.grid
    candidates = np.flatnonzero(slice_counts(sets.caut).ravel() > 0)
    if len(candidates) == 0:
        return np.array(s0, dtype=float), True
    idx = candidates[rng.integers(len(candidates))]
    return grid.state_centers()[idx].copy(), False


def learn(system, grid: ProductGrid, gp: GpConfig, schedule: ThresholdSchedule, s0, n: int,
          seed: int = 0, snapshot_at=(), callback=None) -> LearnTrace:
    """Run ``n`` samples of the active learning loop from state ``s0``.

    ``snapshot_at`` lists sample counts after which the set estimate is kept
    (0 is the prior).  Every randomized choice draws from one generator
    seeded with ``seed``.  If the dynamics raise, the exception carries the
    records collected so far as ``partial_trace``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    s = np.atleast_1d(np.asarray(s0, dtype=float))
    _, outside = grid.snap_state(s)
    if outside:
        raise ValueError(f"initial state {s} lies outside the grid")
    posterior = GpPosterior(gp.kernel, gp.noise_variance, gp.prior_mean)
    centers = grid.centers()
    actions = grid.action_centers()
    trace = LearnTrace()
    snapshot_at = set(int(k) for k in snapshot_at)

    def sets_for(i):
        mean, var = posterior.predict(centers)
        return sets_from_moments(grid, mean, var, *schedule.at(i))

    sets = sets_for(0)
    if 0 in snapshot_at:
        trace.snapshots[0] = sets
    for i in range(n):
        s_idx, _ = grid.snap_state(s)
        # rank actions by the posterior at the visited state itself, not the
        # cell center, so repeated visits keep reducing the variance
        here = np.hstack([np.repeat(s[None, :], len(actions), axis=0), actions])
        mean_here, var_here = posterior.predict(here)
        prob_here = exceedance_probability(mean_here, var_here, sets.thresholds[2])
        a_idx = select_action(s_idx, sets.caut, _on_slice(grid, s_idx, var_here),
                              _on_slice(grid, s_idx, prob_here))
        a = actions[a_idx]
        cautious_available = bool(sets.caut.values[s_idx].any())
        try:
            out = system.step(s, a)
        except Exception as exc:
            # records so far were already handed to ``callback``
            exc.partial_trace = trace
            raise
        record = {
            "i": i, "state": s.tolist(), "action": a.tolist(), "cautious": cautious_available,
            "next_state": out.next_state.tolist(), "failed": bool(out.failed), "reason": out.reason,
            "gamma_opt": sets.thresholds[0], "gamma_caut": sets.thresholds[1],
            "lambda_caut": sets.thresholds[2],
        }
        q = np.concatenate([s, a])
        if out.failed:
            target = 0.0
        else:
            nxt_idx, nxt_out = grid.snap_state(out.next_state)
            # successors off the grid cannot be certified
            target = 0.0 if nxt_out else estimate_lambda(sets.opt, nxt_idx)
        posterior.add(q, target)
        record["target"] = target
        sets = sets_for(i + 1)
        if out.failed:
            s, fallback = _reset_state(sets, rng, s0)
            record["reset_state"] = s.tolist()
            record["reset_fallback"] = fallback
        else:
            s = out.next_state.copy()
        trace.records.append(record)
        if i + 1 in snapshot_at:
            trace.snapshots[i + 1] = sets
        if callback is not None:
            callback(i, record, sets)
    trace.posterior = posterior
    trace.final_sets = sets
    return trace


# -- exact table update for finite systems -----------------------------------

@dataclass
class TabularResult:
    q_estimate: ScalarField
    samples: list


def tabular_measure(q_values: np.ndarray, grid: ProductGrid) -> np.ndarray:
    """Counting measure of ``{a : q_values[s, a] > 0}`` per state (times cell volume)."""
    axes = tuple(range(grid.n_state_dims, grid.ndim))
    return (q_values > 0).sum(axis=axes) * grid.action_cell_volume


def tabular_learn(system, n: int, seed: int = 0, grid: ProductGrid | None = None,
                  initial=None) -> TabularResult:
    """Uniformly random sampling over Q with the exact table update.

    A failed sample sets its pair to 0; otherwise the pair takes the current
    estimate of the measure at the successor.  The default initialization is
    the number of actions (times the action cell volume), an upper bound on
    the measure everywhere.
    """
    grid = grid if grid is not None else system.default_grid()
    if initial is None:
        initial = grid.n_actions * grid.action_cell_volume
    q_est = np.broadcast_to(np.asarray(initial, dtype=float), grid.shape).copy()
    rng = np.random.default_rng(seed)
    states, actions = grid.state_centers(), grid.action_centers()
    flat = q_est.reshape(grid.n_states, grid.n_actions)
    vol = grid.action_cell_volume
    # dynamics are deterministic, so each cell's outcome is simulated once
    outcomes = {}
    samples = [int(k) for k in rng.integers(grid.size, size=n)]
    for k in samples:
        si, ai = divmod(k, grid.n_actions)
        if k not in outcomes:
            out = system.step(states[si], actions[ai])
            if out.failed:
                outcomes[k] = None
            else:
                nxt, outside = grid.snap_states(out.next_state[None, :])
                outcomes[k] = None if outside[0] else int(nxt[0])
        nxt = outcomes[k]
        flat[si, ai] = 0.0 if nxt is None else np.count_nonzero(flat[nxt] > 0) * vol
    return TabularResult(ScalarField(grid, q_est), samples)


def tabular_sample_budget(n_cells: int, max_horizon: int, delta: float = 1e-6) -> int:
    """Samples after which uniform sampling has converged on unviable pairs.

    Convergence needs ``max_horizon + 1`` successive rounds in which every
    cell is sampled at least once.  Splitting the stream into blocks of
    ``ceil(n_cells * (ln n_cells + ln(1/delta)))`` samples, each block misses
    some cell with probability at most ``delta`` (union bound).
    """
    block = math.ceil(n_cells * (math.log(n_cells) + math.log(1.0 / delta)))
    return (max_horizon + 1) * block
