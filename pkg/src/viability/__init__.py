"""Learning a safety measure over state-action space.

Submodules: :mod:`~viability.grids` (gridded spaces and fields),
:mod:`~viability.dynamics` (toy table, hovership, SLIP),
:mod:`~viability.oracle` (brute-force ground truth),
:mod:`~viability.gp` (GP regression), :mod:`~viability.learner`
(safe sampling loop and tabular variant), :mod:`~viability.experiment`
and :mod:`~viability.cli` (reproducible runs).
"""

__version__ = "0.1.0"
