import numpy as np
import pytest
from scipy.stats import norm

from mixselect.data import add_intercept, from_arrays
from mixselect.sampler import PriorConfig, predict, run_chain
from mixselect.sampler.predict import mean_draws, mixture_quantiles
from oracles import dense_kernel, dense_projector


def _one_draw(data, **values):
    """A single-draw sample set with the given parameter values."""
    s = run_chain(data, PriorConfig(), iterations=2, burn_in=1, seed=0, m=data.n)
    p, q = data.p, data.q
    s.beta[0] = values.get("beta", np.zeros(p))
    s.lam[0] = values.get("lam", np.zeros(p * (p - 1) // 2))
    s.alpha[0] = values.get("alpha", np.zeros(q))
    s.rho[0] = values.get("rho", np.zeros(p))
    tau = values.get("tau_star", 0.0)
    s.scalars["tau_star"][0] = tau
    s.scalars["gamma_tau"][0] = float(tau > 0)
    s.scalars["sigma2"][0] = values.get("sigma2", 1.0)
    s.meta.pop("_gp_cache", None)
    return s


@pytest.fixture
def small(rng):
    n, p = 25, 2
    X = rng.standard_normal((n, p))
    y = X[:, 0] + np.cos(2 * X[:, 1]) + 0.3 * rng.standard_normal(n)
    return add_intercept(from_arrays(y, X))


def test_null_model_interval_is_normal(small):
    s = _one_draw(small, alpha=np.array([0.7]), sigma2=4.0)
    pred = predict(s, np.zeros((3, 2)), np.ones((3, 1)), alpha=0.05)
    z = norm.ppf(0.975)
    np.testing.assert_allclose(pred.mean, 0.7)
    np.testing.assert_allclose(pred.lower, 0.7 - 2 * z, atol=1e-8)
    np.testing.assert_allclose(pred.upper, 0.7 + 2 * z, atol=1e-8)


def test_gp_conditional_matches_dense_formula(small, rng):
    beta = np.array([0.9, 0.0])
    alpha = np.array([0.2])
    rho = np.array([0.0, 0.8])
    tau, sigma2 = 1.3, 0.25
    s = _one_draw(small, beta=beta, alpha=alpha, rho=rho, tau_star=tau, sigma2=sigma2)
    X, Z, y = small.X, small.Z, small.y
    Xn = rng.standard_normal((6, 2))
    Zn = np.ones((6, 1))
    means, var = mean_draws(s, Xn, Zn, with_variance=True)

    T = np.hstack([X, Z])
    H = np.linalg.pinv(T)
    B = np.hstack([Xn, Zn]) @ H
    P = dense_projector(T)
    K = dense_kernel(X, X, rho, 1.0)
    Kx = dense_kernel(Xn, X, rho, 1.0)
    c2 = tau**2 * sigma2
    cross = c2 * (Kx - B @ K) @ P
    Sigma = sigma2 * np.eye(len(y)) + c2 * P @ K @ P
    r = y - X @ beta - Z @ alpha
    expect_mean = Xn @ beta + Zn @ alpha + cross @ np.linalg.solve(Sigma, r)
    prior_var = c2 * (1 - 2 * np.sum(B * Kx, axis=1) + np.einsum("ij,jk,ik->i", B, K, B))
    post_var = prior_var - np.einsum("ij,ij->i", cross, np.linalg.solve(Sigma, cross.T).T)
    np.testing.assert_allclose(means[0], expect_mean, rtol=1e-7, atol=1e-9)
    np.testing.assert_allclose(var[0], sigma2 + post_var, rtol=1e-6, atol=1e-9)


def test_gp_mean_tracks_projected_response_as_amplitude_grows(small):
    P = dense_projector(np.hstack([small.X, small.Z]))
    misfit = []
    for tau in (2.0, 40.0, 400.0):
        s = _one_draw(small, rho=np.array([0.5, 0.5]), tau_star=tau, sigma2=1e-3)
        fitted = mean_draws(s, small.X, small.Z)[0]
        misfit.append(np.linalg.norm(P @ (small.y - fitted)))
    assert misfit[0] > misfit[1] > misfit[2]
    assert misfit[2] < 0.1 * np.linalg.norm(P @ small.y)


def test_mixture_quantiles_single_component():
    lo, hi = mixture_quantiles(np.array([[1.0, -2.0]]), np.array([[2.0, 0.5]]), [0.1, 0.9])
    np.testing.assert_allclose(lo, norm.ppf(0.1, [1.0, -2.0], [2.0, 0.5]), atol=1e-9)
    np.testing.assert_allclose(hi, norm.ppf(0.9, [1.0, -2.0], [2.0, 0.5]), atol=1e-9)


def test_interval_endpoints_at_extreme_alpha(small):
    s = _one_draw(small, alpha=np.array([0.3]))
    wide = predict(s, np.zeros((1, 2)), np.ones((1, 1)), alpha=0.0)
    assert wide.lower[0] < -5 and wide.upper[0] > 5
    point = predict(s, np.zeros((1, 2)), np.ones((1, 1)), alpha=1.0)
    assert point.lower[0] == point.upper[0] == pytest.approx(0.3, abs=1e-8)


def test_prediction_shape_errors(small):
    s = _one_draw(small)
    with pytest.raises(ValueError):
        predict(s, np.zeros((2, 3)), np.ones((2, 1)))
    with pytest.raises(ValueError):
        predict(s, np.zeros((2, 2)), np.ones((2, 2)))
    with pytest.raises(ValueError):
        predict(s, np.array([[np.nan, 0.0]]), np.ones((1, 1)))
    with pytest.raises(ValueError):
        predict(s, np.zeros((2, 2)), np.ones((2, 1)), alpha=1.5)
