"""Exact Gaussian-process regression with Matern covariance.

Hyperparameters are inputs: nothing here optimizes the marginal likelihood.
Use :func:`estimate_hyperparameters` to derive them from a brute-force
measure of a low-fidelity model instead.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.stats import norm

logger = logging.getLogger(__name__)

SMOOTHNESS = (0.5, 1.5, 2.5)
MAX_JITTER = 1e-6  # relative to the signal variance


class GPFitError(np.linalg.LinAlgError):
    """Kernel matrix could not be factorized even with the maximum jitter."""


@dataclass(frozen=True)
class KernelParams:
    lengthscales: tuple
    signal_variance: float
    smoothness: float = 2.5

    def __post_init__(self):
        ls = tuple(float(x) for x in np.atleast_1d(self.lengthscales))
        object.__setattr__(self, "lengthscales", ls)
        if not ls or any(not (x > 0 and np.isfinite(x)) for x in ls):
            raise ValueError(f"lengthscales must be positive, got {ls}")
        if not (self.signal_variance > 0 and np.isfinite(self.signal_variance)):
            raise ValueError(f"signal variance must be positive, got {self.signal_variance}")
        if self.smoothness not in SMOOTHNESS:
            raise ValueError(f"smoothness must be one of {SMOOTHNESS}, got {self.smoothness}")

    @property
    def ndim(self) -> int:
        return len(self.lengthscales)


def matern_correlation(r, smoothness: float):
    """Matern correlation as a function of scaled distance ``r >= 0``."""
    r = np.asarray(r, dtype=float)
    if smoothness == 0.5:
        return np.exp(-r)
    if smoothness == 1.5:
        t = np.sqrt(3.0) * r
        return (1.0 + t) * np.exp(-t)
    if smoothness == 2.5:
        t = np.sqrt(5.0) * r
        return (1.0 + t + t * t / 3.0) * np.exp(-t)
    raise ValueError(f"unsupported smoothness {smoothness}")


def scaled_distance(x1, x2, lengthscales):
    x1 = np.atleast_2d(np.asarray(x1, dtype=float)) / lengthscales
    x2 = np.atleast_2d(np.asarray(x2, dtype=float)) / lengthscales
    # explicit differences: the |x|^2 + |y|^2 - 2 x.y expansion cancels badly
    # for nearby points, which the non-smooth nu = 1/2 kernel passes straight through
    diff = x1[:, None, :] - x2[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def kernel_matrix(x1, x2, params: KernelParams) -> np.ndarray:
    x1 = np.atleast_2d(np.asarray(x1, dtype=float))
    x2 = np.atleast_2d(np.asarray(x2, dtype=float))
    if x1.shape[1] != params.ndim or x2.shape[1] != params.ndim:
        raise ValueError(f"inputs have dimension {x1.shape[1]}/{x2.shape[1]}, kernel expects {params.ndim}")
    r = scaled_distance(x1, x2, np.asarray(params.lengthscales))
    return params.signal_variance * matern_correlation(r, params.smoothness)


def kernel_eval(q1, q2, params: KernelParams) -> float:
    """Covariance between two single points."""
    return float(kernel_matrix(np.atleast_1d(q1)[None, :], np.atleast_1d(q2)[None, :], params)[0, 0])


class ConstantMean:
    def __init__(self, value: float = 0.0):
        self.value = float(value)

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.full(len(x), self.value)

    def to_dict(self):
        return {"kind": "constant", "value": self.value}


class BumpMean:
    """``offset + height * exp(-0.5 * sum(((x - center) / widths) ** 2))``."""

    def __init__(self, center, widths, height: float, offset: float = 0.0):
        self.center = np.asarray(center, dtype=float)
        self.widths = np.asarray(widths, dtype=float)
        if np.any(self.widths <= 0):
            raise ValueError("bump widths must be positive")
        self.height = float(height)
        self.offset = float(offset)

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        z = (x - self.center) / self.widths
        return self.offset + self.height * np.exp(-0.5 * np.sum(z * z, axis=1))

    def to_dict(self):
        return {"kind": "bump", "center": self.center.tolist(), "widths": self.widths.tolist(),
                "height": self.height, "offset": self.offset}


class GridMean:
    """Prior mean read off a gridded field (e.g. a brute-force ``Lambda_Q``).

    Linear interpolation between cell centers; constant extrapolation past
    the outermost centers.  ``scale`` and ``offset`` are applied afterwards.
    """

    def __init__(self, field_, scale: float = 1.0, offset: float = 0.0):
        from scipy.interpolate import RegularGridInterpolator

        self.grid = field_.grid
        self.values = np.asarray(field_.values, dtype=float)
        self.scale = float(scale)
        self.offset = float(offset)
        axes = [ax.centers for ax in self.grid.axes]
        self._lo = np.array([c[0] for c in axes])
        self._hi = np.array([c[-1] for c in axes])
        # single-cell axes cannot be interpolated along; drop them
        self._keep = [i for i, c in enumerate(axes) if len(c) > 1]
        self._interp = RegularGridInterpolator(
            [axes[i] for i in self._keep], self.values.reshape([len(axes[i]) for i in self._keep]))

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        x = np.clip(x, self._lo, self._hi)[:, self._keep]
        return self.offset + self.scale * self._interp(x)

    def to_dict(self):
        return {"kind": "grid", "shape": list(self.values.shape), "scale": self.scale, "offset": self.offset}


def _as_prior(prior_mean):
    if prior_mean is None:
        return ConstantMean(0.0)
    if callable(prior_mean):
        return prior_mean
    return ConstantMean(float(prior_mean))


@dataclass
class GpPosterior:
    """GP conditioned on ``(x, y)``; the Cholesky factor is kept in sync."""

    kernel: KernelParams
    noise_variance: float
    prior_mean: object = field(default_factory=ConstantMean)
    x: np.ndarray = None
    y: np.ndarray = None
    jitter: float = 0.0
    negative_variance_count: int = 0

    def __post_init__(self):
        if not self.noise_variance > 0:
            raise ValueError("noise variance must be positive")
        self.prior_mean = _as_prior(self.prior_mean)
        d = self.kernel.ndim
        self.x = np.zeros((0, d)) if self.x is None else np.atleast_2d(np.asarray(self.x, dtype=float))
        self.y = np.zeros(0) if self.y is None else np.asarray(self.y, dtype=float).ravel()
        if self.x.shape[1] != d or len(self.x) != len(self.y):
            raise ValueError("training inputs and targets do not match the kernel dimension")
        self._factorize()

    @property
    def n(self) -> int:
        return len(self.y)

    def _factorize(self):
        n = self.n
        self._chol = None
        self._alpha = np.zeros(0)
        if n == 0:
            return
        k = kernel_matrix(self.x, self.x, self.kernel)
        k[np.diag_indices(n)] += self.noise_variance
        sv = self.kernel.signal_variance
        for jitter in [0.0] + [sv * 10.0 ** e for e in range(-12, -5)]:
            try:
                self._chol = cholesky(k + jitter * np.eye(n), lower=True, check_finite=False)
                self.jitter = jitter
                break
            except np.linalg.LinAlgError:
                continue
        else:
            raise GPFitError(f"kernel matrix with {n} points is not positive definite even with "
                             f"jitter {MAX_JITTER * sv:g}; inputs may be duplicated or ill-scaled")
        resid = self.y - self.prior_mean(self.x)
        self._alpha = cho_solve((self._chol, True), resid, check_finite=False)

    def add(self, x_new, y_new):
        """Append data and refactorize."""
        x_new = np.atleast_2d(np.asarray(x_new, dtype=float))
        self.x = np.vstack([self.x, x_new])
        self.y = np.concatenate([self.y, np.atleast_1d(np.asarray(y_new, dtype=float))])
        self._factorize()
        return self

    def predict(self, q):
        """Posterior mean and variance at the rows of ``q``."""
        q = np.atleast_2d(np.asarray(q, dtype=float))
        if q.shape[1] != self.kernel.ndim:
            raise ValueError(f"query has dimension {q.shape[1]}, kernel expects {self.kernel.ndim}")
        mean = self.prior_mean(q)
        var = np.full(len(q), self.kernel.signal_variance)
        if self.n == 0:
            return mean, var
        k_star = kernel_matrix(self.x, q, self.kernel)
        mean = mean + k_star.T @ self._alpha
        v = solve_triangular(self._chol, k_star, lower=True, check_finite=False)
        var = var - np.sum(v * v, axis=0)
        neg = var < 0
        if np.any(neg):
            self.negative_variance_count += int(neg.sum())
            logger.debug("clamped %d negative posterior variances", int(neg.sum()))
            var = np.where(neg, 0.0, var)
        return mean, var


def fit(x, y, kernel: KernelParams, noise_variance: float, prior_mean=None) -> GpPosterior:
    """Condition a GP on data ``(x, y)``; an empty data set gives the prior."""
    return GpPosterior(kernel, noise_variance, prior_mean, x, y)


def predict(posterior: GpPosterior, q):
    """``(mean, variance)`` for one point (scalars) or many (arrays)."""
    q_arr = np.asarray(q, dtype=float)
    single = q_arr.ndim <= 1
    mean, var = posterior.predict(np.atleast_2d(q_arr) if not single else q_arr.reshape(1, -1))
    if single:
        return float(mean[0]), float(var[0])
    return mean, var


def exceedance_probability(mean, variance, level):
    """``P[X > level]`` for ``X ~ N(mean, variance)``; degenerate if variance is 0."""
    mean = np.asarray(mean, dtype=float)
    sd = np.sqrt(np.maximum(np.asarray(variance, dtype=float), 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (level - mean) / sd
        p = norm.sf(z)
    p = np.where(sd > 0, p, (mean > level).astype(float))
    return p if p.ndim else float(p)


def prob_exceeds(posterior: GpPosterior, q, level: float):
    mean, var = predict(posterior, q)
    return exceedance_probability(mean, var, level)


def estimate_hyperparameters(q_measure, smoothness: float = 2.5, noise_fraction: float = 1e-3):
    """Kernel settings from a brute-force ``Lambda_Q`` field.

    The signal variance is the variance of the field; each lengthscale is the
    lag at which the empirical autocorrelation along that axis falls to the
    Matern correlation at unit scaled distance.  Returns
    ``(KernelParams, noise_variance)``.
    """
    values = np.asarray(q_measure.values, dtype=float)
    grid = q_measure.grid
    variance = float(values.var())
    if variance <= 0:
        raise ValueError("measure field is constant; cannot estimate a kernel")
    target = float(matern_correlation(1.0, smoothness))
    centered = values - values.mean()
    lengthscales = []
    for d, ax in enumerate(grid.axes):
        moved = np.moveaxis(centered, d, 0)
        n = moved.shape[0]
        denom = np.sum(moved * moved)
        ls = n * ax.cell_width
        prev = 1.0
        for lag in range(1, n):
            rho = np.sum(moved[lag:] * moved[:-lag]) / denom * n / (n - lag)
            if rho <= target:
                # interpolate between lags
                frac = (prev - target) / (prev - rho) if prev != rho else 0.0
                ls = (lag - 1 + frac) * ax.cell_width
                break
            prev = rho
        lengthscales.append(max(ls, ax.cell_width))
    kernel = KernelParams(tuple(lengthscales), variance, smoothness)
    return kernel, noise_fraction * variance
