import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.distance import cdist
from scipy.special import gamma, kv

from viability.gp import (MAX_JITTER, BumpMean, ConstantMean, GPFitError, GridMean, KernelParams,
                          estimate_hyperparameters, exceedance_probability, fit, kernel_eval,
                          kernel_matrix, matern_correlation, predict, prob_exceeds)
from viability.grids import AxisGrid, ProductGrid, ScalarField


def bessel_matern(x1, x2, lengthscales, variance, nu):
    """Matern covariance from the general Bessel-function definition."""
    r = cdist(x1 / lengthscales, x2 / lengthscales)
    t = np.sqrt(2 * nu) * r
    with np.errstate(invalid="ignore"):
        k = variance * 2 ** (1 - nu) / gamma(nu) * t ** nu * kv(nu, t)
    return np.where(r == 0, variance, k)


def dense_posterior(x, y, q, ls, var, nu, noise, mean):
    """Textbook GP equations with a plain dense solve."""
    k = bessel_matern(x, x, ls, var, nu) + noise * np.eye(len(x))
    ks = bessel_matern(x, q, ls, var, nu)
    mu = mean + ks.T @ np.linalg.solve(k, y - mean)
    cov = var - np.sum(ks * np.linalg.solve(k, ks), axis=0)
    return mu, cov


@pytest.mark.parametrize("nu", [0.5, 1.5, 2.5])
def test_closed_form_matern_matches_bessel(nu):
    r = np.linspace(0.01, 5, 50)
    x = np.column_stack([r, np.zeros_like(r)])
    ref = bessel_matern(np.zeros((1, 2)), x, np.ones(2), 1.0, nu)[0]
    np.testing.assert_allclose(matern_correlation(r, nu), ref, rtol=1e-12)


def test_kernel_properties():
    k = KernelParams((0.3, 0.7), 2.0, 1.5)
    assert kernel_eval([0.1, 0.2], [0.1, 0.2], k) == pytest.approx(2.0)
    assert kernel_eval([0, 0], [1, 0], k) == pytest.approx(kernel_eval([1, 0], [0, 0], k))
    with pytest.raises(ValueError):
        KernelParams((0.3,), 1.0, 2.0)
    with pytest.raises(ValueError):
        KernelParams((0.0,), 1.0)
    with pytest.raises(ValueError):
        kernel_matrix(np.zeros((2, 3)), np.zeros((2, 3)), k)


def test_posterior_matches_dense_solve_oracle():
    rng = np.random.default_rng(20240601)
    for trial in range(100):
        d = int(rng.integers(1, 4))
        n = int(rng.integers(5, 51))
        nu = [0.5, 1.5, 2.5][trial % 3]
        ls = rng.uniform(0.2, 1.0, d)
        var = rng.uniform(0.1, 2.0)
        noise = var * rng.uniform(1e-3, 1e-1)
        mean = rng.uniform(-1, 1)
        x = rng.uniform(0, 2, (n, d))
        y = rng.normal(size=n)
        q = rng.uniform(-0.5, 2.5, (30, d))
        post = fit(x, y, KernelParams(tuple(ls), var, nu), noise, mean)
        mu, cov = post.predict(q)
        mu_ref, cov_ref = dense_posterior(x, y, q, ls, var, nu, noise, mean)
        assert post.jitter == 0.0
        np.testing.assert_allclose(mu, mu_ref, rtol=1e-8, atol=1e-8 * np.abs(y).max())
        # relative to the prior variance; near data the posterior variance is tiny
        np.testing.assert_allclose(cov, cov_ref, rtol=1e-8, atol=1e-8 * var)


def test_exceedance_half_at_mean():
    rng = np.random.default_rng(7)
    post = fit(rng.uniform(size=(10, 2)), rng.normal(size=10), KernelParams((0.3, 0.3), 1.0), 0.01)
    q = rng.uniform(size=(20, 2))
    mu, _ = post.predict(q)
    for qi, m in zip(q, mu):
        assert prob_exceeds(post, qi, m) == pytest.approx(0.5, abs=1e-12)


def test_exceedance_table_value():
    assert exceedance_probability(1.0, 1.0, 0.0) == pytest.approx(0.8413447460685429, abs=1e-12)


def test_exceedance_degenerate_variance():
    assert exceedance_probability(1.0, 0.0, 0.5) == 1.0
    assert exceedance_probability(0.5, 0.0, 0.5) == 0.0
    assert exceedance_probability(0.2, 0.0, 0.5) == 0.0
    np.testing.assert_array_equal(exceedance_probability(np.array([1.0, 0.0]), np.array([0.0, 0.0]), 0.5), [1.0, 0.0])


def test_empty_data_gives_prior():
    post = fit(np.zeros((0, 2)), np.zeros(0), KernelParams((1.0, 1.0), 0.7), 0.01, ConstantMean(0.3))
    m, v = predict(post, [0.2, 0.4])
    assert m == 0.3 and v == pytest.approx(0.7)


def test_jitter_escalation_on_duplicates():
    k = KernelParams((0.5,), 1.0)
    x = np.zeros((6, 1))
    y = np.ones(6)
    post = fit(x, y, k, 1e-18)
    assert 0 < post.jitter <= MAX_JITTER * k.signal_variance
    assert predict(post, [0.0])[0] == pytest.approx(1.0, abs=1e-4)


def test_fit_error_when_jitter_is_not_enough(monkeypatch):
    import viability.gp as gp

    def never(*a, **k):
        raise np.linalg.LinAlgError("not PD")

    monkeypatch.setattr(gp, "cholesky", never)
    with pytest.raises(GPFitError):
        fit(np.zeros((2, 1)), np.zeros(2), KernelParams((1.0,), 1.0), 1e-6)


def test_add_equals_batch_fit():
    rng = np.random.default_rng(1)
    x, y = rng.uniform(size=(12, 2)), rng.normal(size=12)
    k = KernelParams((0.4, 0.2), 0.5)
    inc = fit(x[:5], y[:5], k, 1e-3)
    for xi, yi in zip(x[5:], y[5:]):
        inc.add(xi, yi)
    batch = fit(x, y, k, 1e-3)
    q = rng.uniform(size=(7, 2))
    np.testing.assert_allclose(inc.predict(q)[0], batch.predict(q)[0], rtol=1e-12)


def test_predict_rejects_wrong_dimension():
    post = fit(np.zeros((1, 2)), [0.0], KernelParams((1.0, 1.0), 1.0), 0.1)
    with pytest.raises(ValueError):
        post.predict(np.zeros((3, 3)))


def test_noise_must_be_positive():
    with pytest.raises(ValueError):
        fit(np.zeros((1, 1)), [0.0], KernelParams((1.0,), 1.0), 0.0)


def test_prior_means():
    bump = BumpMean([0.5, 0.5], [0.1, 0.2], 2.0, 0.1)
    assert bump([[0.5, 0.5]])[0] == pytest.approx(2.1)
    assert bump([[5.0, 5.0]])[0] == pytest.approx(0.1)
    g = ProductGrid((AxisGrid(0, 1, 4),), (AxisGrid(0, 1, 2),))
    vals = np.arange(8.0).reshape(4, 2)
    gm = GridMean(ScalarField(g, vals))
    np.testing.assert_allclose(gm(g.centers()), vals.ravel())
    # halfway between the first two state centers, first action center
    assert gm([[0.25, 0.25]])[0] == pytest.approx(1.0)
    # clamped beyond the outermost centers
    assert gm([[-3.0, 0.25]])[0] == pytest.approx(0.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(-5, 5), st.floats(1e-6, 10), st.floats(-5, 5), st.floats(0, 3))
def test_exceedance_monotone_in_level(mean, var, level, step):
    assert exceedance_probability(mean, var, level + step) <= exceedance_probability(mean, var, level) + 1e-15


@settings(max_examples=60, deadline=None)
@given(st.floats(-5, 5), st.floats(1e-6, 10), st.floats(-5, 5), st.floats(0, 3))
def test_exceedance_monotone_in_mean(mean, var, level, step):
    assert exceedance_probability(mean + step, var, level) >= exceedance_probability(mean, var, level) - 1e-15


def test_estimate_hyperparameters_recovers_lengthscale():
    # a field whose empirical autocorrelation is exactly Matern at its lengthscale is
    # hard to build, so check the cheaper facts: variance, ordering, positivity
    g = ProductGrid((AxisGrid(0, 1, 60),), (AxisGrid(0, 1, 60),))
    c = g.centers()
    vals = (np.sin(2 * np.pi * c[:, 0]) + np.sin(8 * np.pi * c[:, 1]) + 2).reshape(60, 60)
    k, noise = estimate_hyperparameters(ScalarField(g, vals))
    assert k.signal_variance == pytest.approx(vals.var())
    assert k.lengthscales[0] > k.lengthscales[1] > 0
    assert noise == pytest.approx(1e-3 * vals.var())
    with pytest.raises(ValueError):
        estimate_hyperparameters(ScalarField(g, np.ones((60, 60))))
