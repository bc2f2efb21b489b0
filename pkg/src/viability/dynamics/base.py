"""Shared types for black-box transition maps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DynamicsError(RuntimeError):
    """A transition could not be computed (integrator failure, bad input).

    Never used to signal a failure of the system itself; that is
    ``TransitionOutcome.failed``.
    """


@dataclass(frozen=True)
class TransitionOutcome:
    next_state: np.ndarray
    failed: bool
    reason: str = ""

    def __eq__(self, other):
        if not isinstance(other, TransitionOutcome):
            return NotImplemented
        return (self.failed == other.failed and self.reason == other.reason
                and np.array_equal(self.next_state, other.next_state))

    __hash__ = None


class System:
    """Interface every system implements.

    Subclasses define ``step(state, action)`` returning a
    :class:`TransitionOutcome`, ``in_failure_set(state)``, and
    ``default_grid()``.  States and actions are 1-D float arrays.
    """

    name = "system"
    discrete = False

    def step(self, state, action) -> TransitionOutcome:
        raise NotImplementedError

    def in_failure_set(self, state) -> bool:
        raise NotImplementedError

    def default_grid(self):
        raise NotImplementedError

    def __call__(self, state, action) -> TransitionOutcome:
        return self.step(state, action)


def as_vector(x, name="value") -> np.ndarray:
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.ndim != 1:
        raise ValueError(f"{name} must be a scalar or 1-D vector")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must be finite, got {v}")
    return v
