import numpy as np
import pytest

from mixselect.data import add_intercept, from_arrays
from mixselect.sampler import (
    ModelData,
    ModelState,
    PriorConfig,
    SamplerError,
    run_chain,
    run_chains,
    sweep,
)
from oracles import (
    batch_means_se,
    gp_model_posterior,
    linear_model_posterior,
    sample_prior,
    simulate_response,
)


class PointSlab:
    """Degenerate slab, so that the nonlinear posterior can be enumerated."""

    def __init__(self, value):
        self.value = value

    def sample(self, rng, size=None):
        return self.value if size is None else np.full(size, self.value)

    def logpdf(self, x):
        return 0.0 if np.all(np.asarray(x) == self.value) else -np.inf


def _small_data(rng, n=40, p=3):
    X = rng.standard_normal((n, p))
    y = X[:, 0] - 0.5 * X[:, 1] + X[:, 0] * X[:, 1] + rng.standard_normal(n)
    return add_intercept(from_arrays(y, X))


def test_same_seed_same_draws(linear_data):
    a = run_chain(linear_data, iterations=60, seed=11, m=30)
    b = run_chain(linear_data, iterations=60, seed=11, m=30)
    c = run_chain(linear_data, iterations=60, seed=12, m=30)
    assert np.array_equal(a.beta, b.beta)
    assert np.array_equal(a.scalars["sigma2"], b.scalars["sigma2"])
    assert not np.array_equal(a.beta, c.beta)


@pytest.mark.parametrize("heredity", ["strong", "weak"])
def test_invariants_hold_every_iteration(rng, heredity):
    data = _small_data(rng, n=60, p=4)
    s = run_chain(data, PriorConfig(heredity=heredity), iterations=150, burn_in=0,
                  seed=3, m=30, check_invariants=True)
    assert np.all(s.scalars["sigma2"] > 0)
    assert np.all(np.isfinite(s.beta))
    gamma = s.beta != 0
    for d in range(s.n_draws):
        lam = s.lam_matrix(d)
        for j, k in zip(*np.nonzero(lam)):
            if heredity == "strong":
                assert gamma[d, j] and gamma[d, k]
            else:
                assert gamma[d, j] or gamma[d, k]
    off = s.scalars["gamma_tau"] == 0
    assert np.all(s.rho[off] == 0) and np.all(s.scalars["tau_star"][off] == 0)


def test_burn_in_and_thin_bookkeeping(linear_data):
    s = run_chain(linear_data, iterations=50, burn_in=10, thin=4, seed=0, m=20)
    assert s.n_draws == len(range(10, 50, 4))
    with pytest.raises(ValueError):
        run_chain(linear_data, iterations=10, burn_in=10)
    with pytest.raises(ValueError):
        run_chain(linear_data, iterations=10, thin=0)


def test_multiple_chains_concatenate(linear_data):
    s = run_chains(linear_data, iterations=20, seed=1, m=20, chains=2)
    assert sorted(set(s.chain)) == [0, 1]
    first = s.beta[s.chain == 0]
    second = s.beta[s.chain == 1]
    assert not np.array_equal(first, second)


def test_incomplete_data_needs_imputer():
    X = np.array([[1.0, np.nan], [0.0, 1.0], [1.0, 2.0]])
    data = from_arrays(np.zeros(3), X)
    with pytest.raises(ValueError):
        run_chain(data, iterations=5)


def test_bad_initial_state_rejected(linear_data):
    bad = ModelState.initial(linear_data.p, linear_data.q)
    bad.sigma2 = np.nan
    with pytest.raises(ValueError):
        run_chain(linear_data, iterations=5, init=bad, m=20)


def test_nonfinite_update_raises_sampler_error(linear_data, monkeypatch):
    from mixselect.sampler import chain

    def broken(state, model, rng):
        state.sigma2 = np.inf

    monkeypatch.setattr(chain, "step_sigma2", broken)
    with pytest.raises(SamplerError) as err:
        run_chain(linear_data, iterations=5, m=20)
    assert "sigma2" in str(err.value) and "0" in str(err.value)


def test_large_response_scale_stays_finite(rng):
    data = _small_data(rng, n=50, p=3)
    big = from_arrays(data.y * 1e6, data.X)
    s = run_chain(add_intercept(big), iterations=40, seed=2, m=20)
    assert np.all(np.isfinite(s.scalars["sigma2"]))


def test_linear_posterior_matches_enumeration(rng):
    n, p = 40, 3
    X = rng.standard_normal((n, p))
    y = 0.6 * X[:, 0] + 0.3 * X[:, 0] * X[:, 1] + 0.3 * X[:, 1] + rng.standard_normal(n)
    Z = np.ones((n, 1))
    main, inter, _ = linear_model_posterior(y, X, Z, heredity="strong")
    prior = PriorConfig(nonlinear=False)
    s = run_chain(add_intercept(from_arrays(y, X)), prior, iterations=16000,
                  burn_in=1000, seed=8)
    assert np.max(np.abs(s.main_inclusion() - main)) < 0.03
    upper = s.interaction_inclusion()[np.triu_indices(p, 1)]
    assert np.max(np.abs(upper - inter)) < 0.03


def test_sigma2_posterior_mean_matches_conjugate_formula(rng):
    n = 80
    y = 2.0 * rng.standard_normal(n)
    data = from_arrays(y, np.zeros((n, 0)))
    prior = PriorConfig(nonlinear=False, interactions=False, sigma_shape=2.0, sigma_rate=1.0)
    s = run_chain(data, prior, iterations=6000, burn_in=200, seed=4)
    expect = (prior.sigma_rate + 0.5 * y @ y) / (prior.sigma_shape + n / 2 - 1)
    assert s.scalars["sigma2"].mean() == pytest.approx(expect, rel=0.02)


@pytest.mark.slow
def test_nonlinear_posterior_matches_quadrature():
    rng = np.random.default_rng(5)
    n, p = 15, 2
    X = rng.standard_normal((n, p))
    y = 0.8 * X[:, 0] + np.sin(2 * X[:, 1]) + 0.5 * rng.standard_normal(n)
    exact = gp_model_posterior(y, X, np.ones((n, 1)), 0.7)
    prior = PriorConfig(interactions=False, rho_slab=PointSlab(0.7))
    s = run_chain(add_intercept(from_arrays(y, X)), prior, iterations=16000,
                  burn_in=1000, seed=3, m=n)
    assert s.prob_nonlinear() == pytest.approx(exact["gamma_tau"], abs=0.03)
    np.testing.assert_allclose(s.nonlinear_inclusion(), exact["gamma_rho"], atol=0.03)
    np.testing.assert_allclose(s.main_inclusion(), exact["main"], atol=0.03)


@pytest.mark.slow
def test_successive_conditional_joint_distribution():
    """Alternating posterior sweeps with fresh y draws must leave the prior invariant."""
    rng = np.random.default_rng(1)
    n, p, q = 10, 2, 1
    X = rng.standard_normal((n, p))
    Z = np.ones((n, 1))
    prior = PriorConfig(sigma_shape=3.0, sigma_rate=2.0)
    par = sample_prior(p, q, prior, rng)
    model = ModelData(simulate_response(X, Z, par, rng), X, Z, prior, m=n,
                      rng=np.random.default_rng(0))
    state = ModelState.initial(p, q)
    for key, value in par.items():
        setattr(state, key, value)
    state.gamma_rho = state.rho > 0
    state.delta = state.lam != 0
    state.kfactor = model.kernel_factor(state.rho) if state.gamma_tau else None

    def functionals(gamma, beta, sigma2, gamma_tau, rho, tau, lam, alpha):
        return [gamma[0], beta[0], beta[0] ** 2, sigma2, gamma_tau, rho[0] > 0,
                tau, lam[0, 1] != 0, alpha[0] ** 2]

    chain = []
    for it in range(20000):
        sweep(state, model, rng, it)
        cur = dict(beta=state.beta, lam=state.lam, alpha=state.alpha, rho=state.rho,
                   tau_star=state.tau_star, sigma2=state.sigma2)
        model.y = simulate_response(X, Z, cur, rng)
        chain.append(functionals(state.gamma, state.beta, state.sigma2, state.gamma_tau,
                                 state.rho, state.tau_star, state.lam, state.alpha))
    chain = np.array(chain, dtype=float)
    forward = []
    for _ in range(100000):
        d = sample_prior(p, q, prior, rng)
        forward.append(functionals(d["gamma"], d["beta"], d["sigma2"], d["gamma_tau"],
                                   d["rho"], d["tau_star"], d["lam"], d["alpha"]))
    forward = np.array(forward, dtype=float)
    for j in range(chain.shape[1]):
        se = np.hypot(batch_means_se(chain[:, j]), forward[:, j].std() / np.sqrt(len(forward)))
        z = (chain[:, j].mean() - forward[:, j].mean()) / se
        assert abs(z) < 4, (j, chain[:, j].mean(), forward[:, j].mean())
