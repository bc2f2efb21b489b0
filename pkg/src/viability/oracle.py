"""Brute-force ground truth on a gridded system.

Every Q cell center is stepped once through the dynamics; the resulting
successor table is then iterated to the viability fixed point.  Successors
are snapped to the state cell that contains them, and successors that leave
the grid are treated as unviable (unless they failed, which they are anyway).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from viability.grids import (IndicatorField, ProductGrid, ScalarField,
                             measure_field, project_to_states)


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True)
class TransitionTable:
    """One dynamics call per Q cell, flattened in row-major order.

    ``successor`` is the flat state index of the snapped successor (-1 when
    failed); ``next_states`` keeps the raw continuous successors.
    """

    grid: ProductGrid
    successor: np.ndarray
    failed: np.ndarray
    outside: np.ndarray
    next_states: np.ndarray
    failure_states: np.ndarray


def compute_transitions(system, grid: ProductGrid | None = None) -> TransitionTable:
    grid = grid if grid is not None else system.default_grid()
    states, actions = grid.state_centers(), grid.action_centers()
    n_s, n_a = len(states), len(actions)
    next_states = np.zeros((n_s * n_a, grid.n_state_dims))
    failed = np.zeros(n_s * n_a, dtype=bool)
    for i, s in enumerate(states):
        for j, a in enumerate(actions):
            try:
                out = system.step(s, a)
            except Exception as exc:
                raise OracleError(f"dynamics failed at cell state={s.tolist()} action={a.tolist()}: {exc}") from exc
            next_states[i * n_a + j] = out.next_state
            failed[i * n_a + j] = out.failed
    successor, outside = grid.snap_states(next_states)
    successor = np.where(failed, -1, successor)
    outside &= ~failed
    failure_states = np.array([system.in_failure_set(s) for s in states], dtype=bool)
    return TransitionTable(grid, successor, failed, outside, next_states, failure_states)


@dataclass(frozen=True)
class ViabilityResult:
    q_viable: IndicatorField
    s_viable: IndicatorField
    passes: int
    table: TransitionTable


def _deletion_pass(table: TransitionTable, q_cand: np.ndarray):
    """One synchronous sweep: keep pairs whose successor is still a candidate state."""
    n_a = table.grid.n_actions
    s_cand = q_cand.reshape(-1, n_a).any(axis=1) & ~table.failure_states
    ok = np.zeros_like(q_cand)
    alive = q_cand & (table.successor >= 0)
    ok[alive] = s_cand[table.successor[alive]]
    return ok


def viable_from_table(table: TransitionTable) -> ViabilityResult:
    grid = table.grid
    n_a = grid.n_actions
    state_ok = np.repeat(~table.failure_states, n_a)
    q = state_ok & ~table.failed & ~table.outside
    passes = 0
    while True:
        passes += 1
        q_next = _deletion_pass(table, q)
        if np.array_equal(q_next, q):
            break
        q = q_next
    q_v = IndicatorField(grid, q.reshape(grid.shape))
    return ViabilityResult(q_v, project_to_states(q_v), passes, table)


def compute_viable(system, grid: ProductGrid | None = None):
    """Return ``(Q_V, S_V)`` for ``system`` on ``grid``."""
    res = viable_from_table(compute_transitions(system, grid))
    return res.q_viable, res.s_viable


def compute_measure(q_viable: IndicatorField) -> ScalarField:
    """Safety measure: slice measure of ``Q_V`` at every state cell."""
    return measure_field(q_viable)


def q_measure_from_table(measure: ScalarField, table: TransitionTable) -> ScalarField:
    grid = table.grid
    if measure.grid != grid or not measure.over_states:
        raise OracleError("measure must be a state field on the table's grid")
    lam = measure.values.ravel()
    vals = np.zeros(grid.size)
    ok = (table.successor >= 0) & ~table.outside
    vals[ok] = lam[table.successor[ok]]
    return ScalarField(grid, vals.reshape(grid.shape))


def compute_q_measure(measure: ScalarField, system, grid: ProductGrid | None = None) -> ScalarField:
    """Safety measure of the successor of every Q cell (0 on failure)."""
    table = compute_transitions(system, grid if grid is not None else measure.grid)
    return q_measure_from_table(measure, table)


@dataclass(frozen=True)
class GroundTruth:
    """Everything the oracle knows about one system at one resolution."""

    grid: ProductGrid
    q_viable: IndicatorField
    s_viable: IndicatorField
    measure: ScalarField
    q_measure: ScalarField
    passes: int
    table: TransitionTable

    def summary(self) -> dict:
        g = self.grid
        return {
            "grid": g.to_dict(),
            "q_cells": g.size,
            "s_cells": g.n_states,
            "q_viable_cells": self.q_viable.count(),
            "s_viable_cells": self.s_viable.count(),
            "failed_cells": int(self.table.failed.sum()),
            "outside_cells": int(self.table.outside.sum()),
            "passes": self.passes,
            "max_measure": float(self.measure.values.max()),
        }


def ground_truth(system, grid: ProductGrid | None = None) -> GroundTruth:
    table = compute_transitions(system, grid)
    res = viable_from_table(table)
    lam = compute_measure(res.q_viable)
    lam_q = q_measure_from_table(lam, table)
    return GroundTruth(table.grid, res.q_viable, res.s_viable, lam, lam_q, res.passes, table)


def longest_unviable_horizon(system, q_viable: IndicatorField, grid: ProductGrid | None = None) -> dict:
    """Length of the longest trajectory from each unviable state to failure.

    Only defined for discrete systems, on ``S_U``: states neither viable nor
    failed.  Keys are state cell centers as tuples (for the toy model, the
    state labels).  A cycle inside ``S_U`` would mean the viability
    computation is wrong and raises :class:`OracleError`.
    """
    grid = grid if grid is not None else q_viable.grid
    if not grid.discrete:
        raise OracleError("horizon analysis requires a discrete system")
    table = compute_transitions(system, grid)
    n_a = grid.n_actions
    s_v = project_to_states(q_viable).values.ravel()
    unviable = ~s_v & ~table.failure_states
    succ = table.successor.reshape(-1, n_a)
    failed = table.failed.reshape(-1, n_a)
    length = {}
    visiting = set()

    def visit(i):
        if i in length:
            return length[i]
        if i in visiting:
            raise OracleError(f"cycle among unviable states through state cell {i}")
        visiting.add(i)
        best = 0
        for j in range(n_a):
            if failed[i, j]:
                best = max(best, 1)
            elif not unviable[succ[i, j]]:
                raise OracleError(f"unviable state cell {i} maps into viable cell {succ[i, j]}")
            else:
                best = max(best, 1 + visit(succ[i, j]))
        visiting.discard(i)
        length[i] = best
        return best

    centers = grid.state_centers()
    out = {}
    for i in np.flatnonzero(unviable):
        out[tuple(float(c) for c in centers[i])] = visit(int(i))
    return out


def rollout_audit(system, q_viable: IndicatorField, steps: int = 50, policy="first"):
    """Follow ``Q_V`` actions from every viable cell for ``steps`` steps.

    Each step calls the dynamics from the center of the current cell and
    snaps the successor, i.e. the audit runs on the same discretization the
    oracle used.  Returns the list of ``(start_cell, step, reason)`` failures;
    empty means every viable cell survived.
    """
    grid = q_viable.grid
    n_a = grid.n_actions
    qv = q_viable.values.reshape(grid.n_states, n_a)
    states, actions = grid.state_centers(), grid.action_centers()
    problems = []
    for start in zip(*np.nonzero(qv)):
        s_idx, a_idx = int(start[0]), int(start[1])
        for k in range(steps):
            out = system.step(states[s_idx], actions[a_idx])
            if out.failed:
                problems.append((start, k, "failed"))
                break
            nxt, outside = grid.snap_states(out.next_state[None, :])
            s_idx = int(nxt[0])
            choices = np.flatnonzero(qv[s_idx])
            if outside[0] or len(choices) == 0:
                problems.append((start, k, "left viable set"))
                break
            a_idx = int(choices[0] if policy == "first" else choices[-1])
    return problems
