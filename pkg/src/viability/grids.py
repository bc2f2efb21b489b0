"""Uniform grids over state and state-action spaces, and fields on them.

A :class:`ProductGrid` discretizes ``Q = S x A`` into cells.  Fields store one
value per cell as numpy arrays of shape ``grid.shape``; state-only fields use
``grid.state_shape``.  A cell belongs to a set iff the predicate holds at its
center.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class GridMismatchError(ValueError):
    """Raised when a field is combined with a grid it was not built on."""


@dataclass(frozen=True)
class AxisGrid:
    """Uniform partition of ``[lower, upper]`` into ``num_cells`` cells."""

    lower: float
    upper: float
    num_cells: int

    def __post_init__(self):
        if not (np.isfinite(self.lower) and np.isfinite(self.upper)):
            raise ValueError("axis bounds must be finite")
        if not self.lower < self.upper:
            raise ValueError(f"lower ({self.lower}) must be < upper ({self.upper})")
        if int(self.num_cells) != self.num_cells or self.num_cells < 1:
            raise ValueError(f"num_cells must be a positive integer, got {self.num_cells}")

    @property
    def cell_width(self) -> float:
        return (self.upper - self.lower) / self.num_cells

    @property
    def centers(self) -> np.ndarray:
        return self.lower + (np.arange(self.num_cells) + 0.5) * self.cell_width

    def snap(self, x):
        """Index of the cell containing ``x``.

        Returns ``(index, outside)``; values outside the bounds clamp to the
        boundary cell and are flagged.
        """
        x = np.asarray(x, dtype=float)
        raw = np.floor((x - self.lower) / self.cell_width)
        outside = (x < self.lower) | (x > self.upper)
        idx = np.clip(raw, 0, self.num_cells - 1).astype(int)
        if idx.ndim == 0:
            return int(idx), bool(outside)
        return idx, outside


@dataclass(frozen=True)
class ProductGrid:
    """Cartesian product of state axes and action axes.

    ``discrete=True`` switches measures to the counting measure (cell
    volume 1), as used for finite systems like the toy model.
    """

    state_axes: tuple
    action_axes: tuple
    discrete: bool = False

    def __post_init__(self):
        object.__setattr__(self, "state_axes", tuple(self.state_axes))
        object.__setattr__(self, "action_axes", tuple(self.action_axes))
        if not self.state_axes or not self.action_axes:
            raise ValueError("need at least one state axis and one action axis")

    @property
    def axes(self) -> tuple:
        return self.state_axes + self.action_axes

    @property
    def n_state_dims(self) -> int:
        return len(self.state_axes)

    @property
    def n_action_dims(self) -> int:
        return len(self.action_axes)

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def state_shape(self) -> tuple:
        return tuple(ax.num_cells for ax in self.state_axes)

    @property
    def action_shape(self) -> tuple:
        return tuple(ax.num_cells for ax in self.action_axes)

    @property
    def shape(self) -> tuple:
        return self.state_shape + self.action_shape

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def n_states(self) -> int:
        return int(np.prod(self.state_shape))

    @property
    def n_actions(self) -> int:
        return int(np.prod(self.action_shape))

    @property
    def action_cell_volume(self) -> float:
        if self.discrete:
            return 1.0
        return float(np.prod([ax.cell_width for ax in self.action_axes]))

    @property
    def state_cell_volume(self) -> float:
        if self.discrete:
            return 1.0
        return float(np.prod([ax.cell_width for ax in self.state_axes]))

    @property
    def cell_volume(self) -> float:
        return self.state_cell_volume * self.action_cell_volume

    def state_centers(self) -> np.ndarray:
        """``(n_states, n_state_dims)`` array of state cell centers, row-major."""
        return _mesh([ax.centers for ax in self.state_axes])

    def action_centers(self) -> np.ndarray:
        """``(n_actions, n_action_dims)`` array of action cell centers, row-major."""
        return _mesh([ax.centers for ax in self.action_axes])

    def centers(self) -> np.ndarray:
        """``(size, ndim)`` array of all Q cell centers, row-major."""
        return _mesh([ax.centers for ax in self.axes])

    def snap_state(self, s):
        """Map a continuous state vector to ``(state_index_tuple, outside)``."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if s.shape != (self.n_state_dims,):
            raise GridMismatchError(f"state has shape {s.shape}, grid expects ({self.n_state_dims},)")
        idx, outside = [], False
        for ax, x in zip(self.state_axes, s):
            i, out = ax.snap(x)
            idx.append(i)
            outside = outside or out
        return tuple(idx), outside

    def snap_states(self, states):
        """Vectorized snap of ``(n, n_state_dims)`` states to flat state indices."""
        states = np.asarray(states, dtype=float).reshape(-1, self.n_state_dims)
        idx, outside = [], np.zeros(len(states), dtype=bool)
        for d, ax in enumerate(self.state_axes):
            i, out = ax.snap(states[:, d])
            idx.append(i)
            outside |= out
        flat = np.ravel_multi_index(tuple(idx), self.state_shape)
        return flat, outside

    def to_dict(self) -> dict:
        return {
            "state_axes": [[ax.lower, ax.upper, ax.num_cells] for ax in self.state_axes],
            "action_axes": [[ax.lower, ax.upper, ax.num_cells] for ax in self.action_axes],
            "discrete": self.discrete,
        }


def _mesh(vectors: Sequence[np.ndarray]) -> np.ndarray:
    grids = np.meshgrid(*vectors, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


@dataclass(frozen=True)
class IndicatorField:
    """Boolean value per cell of ``grid`` (Q cells, or S cells if ``over_states``)."""

    grid: ProductGrid
    values: np.ndarray
    over_states: bool = False

    def __post_init__(self):
        values = np.array(self.values, dtype=bool)
        expected = self.grid.state_shape if self.over_states else self.grid.shape
        if values.shape != expected:
            raise GridMismatchError(f"values have shape {values.shape}, expected {expected}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __and__(self, other):
        _check_same(self, other)
        return IndicatorField(self.grid, self.values & other.values, self.over_states)

    def __or__(self, other):
        _check_same(self, other)
        return IndicatorField(self.grid, self.values | other.values, self.over_states)

    def __invert__(self):
        return IndicatorField(self.grid, ~self.values, self.over_states)

    def issubset(self, other) -> bool:
        _check_same(self, other)
        return bool(np.all(~self.values | other.values))

    def count(self) -> int:
        return int(self.values.sum())

    def __eq__(self, other):
        if not isinstance(other, IndicatorField):
            return NotImplemented
        return (self.grid == other.grid and self.over_states == other.over_states
                and np.array_equal(self.values, other.values))

    __hash__ = None


@dataclass(frozen=True)
class ScalarField:
    """Non-negative real value per cell (Q cells, or S cells if ``over_states``)."""

    grid: ProductGrid
    values: np.ndarray
    over_states: bool = False

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        expected = self.grid.state_shape if self.over_states else self.grid.shape
        if values.shape != expected:
            raise GridMismatchError(f"values have shape {values.shape}, expected {expected}")
        if np.any(~(values >= 0)):
            raise ValueError("scalar field values must be non-negative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __eq__(self, other):
        if not isinstance(other, ScalarField):
            return NotImplemented
        return (self.grid == other.grid and self.over_states == other.over_states
                and np.array_equal(self.values, other.values))

    __hash__ = None


def _check_same(a, b):
    if a.grid != b.grid or a.over_states != b.over_states:
        raise GridMismatchError("fields live on different grids")


def _check_q_field(q_set, grid):
    if q_set.over_states:
        raise GridMismatchError("expected a field over Q, got a field over S")
    if grid is not None and q_set.grid != grid:
        raise GridMismatchError("field grid differs from the declared grid")


def _action_axes_tuple(grid):
    return tuple(range(grid.n_state_dims, grid.ndim))


def project_to_states(q_set: IndicatorField, grid: ProductGrid | None = None) -> IndicatorField:
    """State cell is in the projection iff any action cell in its slice is."""
    _check_q_field(q_set, grid)
    g = q_set.grid
    return IndicatorField(g, q_set.values.any(axis=_action_axes_tuple(g)), over_states=True)


def lift_to_q(s_set: IndicatorField) -> IndicatorField:
    """Cylinder set ``{(s, a) : s in s_set}``."""
    if not s_set.over_states:
        raise GridMismatchError("expected a field over S")
    g = s_set.grid
    values = np.broadcast_to(s_set.values.reshape(g.state_shape + (1,) * g.n_action_dims), g.shape)
    return IndicatorField(g, values)


def slice_counts(q_set: IndicatorField) -> np.ndarray:
    """Number of true action cells per state cell."""
    return q_set.values.sum(axis=_action_axes_tuple(q_set.grid))


def slice_measure(q_set: IndicatorField, s) -> float:
    """Measure of the action slice of ``q_set`` at state cell ``s``.

    ``s`` is a state index tuple (or an int for 1-D state spaces).
    """
    _check_q_field(q_set, None)
    g = q_set.grid
    s = (s,) if np.ndim(s) == 0 else tuple(s)
    if len(s) != g.n_state_dims:
        raise IndexError(f"state index {s} has wrong dimension")
    for i, n in zip(s, g.state_shape):
        if not 0 <= i < n:
            raise IndexError(f"state index {s} out of bounds for {g.state_shape}")
    return float(q_set.values[s].sum()) * g.action_cell_volume


def measure_field(q_set: IndicatorField) -> ScalarField:
    """Slice measure at every state cell."""
    _check_q_field(q_set, None)
    g = q_set.grid
    return ScalarField(g, slice_counts(q_set) * g.action_cell_volume, over_states=True)


def level_set(field_: ScalarField, level: float) -> IndicatorField:
    """Cells whose value strictly exceeds ``level``."""
    if level < 0:
        raise ValueError("level must be non-negative")
    return IndicatorField(field_.grid, field_.values > level, field_.over_states)


# -- CSV layout: one row per cell, axis coordinates then value, row-major ----

def field_to_csv(field_, name: str = "value") -> str:
    g = field_.grid
    axes = g.state_axes if field_.over_states else g.axes
    header = [f"s{i}" for i in range(g.n_state_dims)]
    if not field_.over_states:
        header += [f"a{i}" for i in range(g.n_action_dims)]
    coords = _mesh([ax.centers for ax in axes])
    flat = field_.values.ravel()
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header + [name])
    is_bool = flat.dtype == bool
    for c, v in zip(coords, flat):
        writer.writerow([repr(float(x)) for x in c] + [int(v) if is_bool else repr(float(v))])
    return buf.getvalue()


def write_field_csv(path, field_, name: str = "value"):
    with open(path, "w", newline="") as fh:
        fh.write(field_to_csv(field_, name))


def read_field_csv(path, grid: ProductGrid, over_states: bool = False, boolean: bool = False):
    """Inverse of :func:`write_field_csv`; checks coordinates against ``grid``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    body = rows[1:]
    shape = grid.state_shape if over_states else grid.shape
    axes = grid.state_axes if over_states else grid.axes
    if len(body) != int(np.prod(shape)):
        raise GridMismatchError(f"{path}: {len(body)} rows, expected {int(np.prod(shape))}")
    data = np.array([[float(x) for x in r] for r in body])
    coords = _mesh([ax.centers for ax in axes])
    if not np.allclose(data[:, :-1], coords, rtol=0, atol=1e-9 * max(1.0, np.abs(coords).max())):
        raise GridMismatchError(f"{path}: cell coordinates do not match the grid")
    values = data[:, -1].reshape(shape)
    if boolean:
        return IndicatorField(grid, values.astype(bool), over_states)
    return ScalarField(grid, values, over_states)
