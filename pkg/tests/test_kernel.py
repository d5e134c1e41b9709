import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixselect.kernel import KernelParams, covariance, cross_gram, gram_matrix, \
    jittered_cholesky
from oracles import dense_kernel


def test_covariance_at_same_point_is_tau2():
    k = KernelParams(np.array([0.4, 2.0]), 3.0)
    assert covariance([1.0, -2.0], [1.0, -2.0], k) == 3.0


def test_covariance_symmetric_and_decays():
    k = KernelParams(np.array([0.5]), 1.0)
    assert covariance([0.0], [1.0], k) == covariance([1.0], [0.0], k)
    assert covariance([0.0], [2.0], k) < covariance([0.0], [1.0], k)
    assert covariance([0.0], [1.0], k) == pytest.approx(np.exp(-0.5), rel=1e-15)


def test_zero_rho_removes_exposure():
    k = KernelParams(np.array([0.0, 1.0]), 1.0)
    assert covariance([5.0, 0.0], [-3.0, 0.0], k) == 1.0


def test_all_zero_rho_gives_constant_gram(rng):
    X = rng.standard_normal((6, 3))
    K = gram_matrix(X, KernelParams(np.zeros(3), 2.0))
    assert np.all(K == 2.0)


def test_gram_matches_pointwise(rng):
    X = rng.standard_normal((9, 3))
    k = KernelParams(np.array([0.1, 0.0, 0.8]), 1.4)
    K = gram_matrix(X, k)
    for i in range(9):
        for j in range(9):
            assert K[i, j] == pytest.approx(covariance(X[i], X[j], k), rel=1e-13)


def test_cross_gram_consistent_with_gram(rng):
    X = rng.standard_normal((8, 2))
    k = KernelParams(np.array([0.3, 0.9]), 0.7)
    np.testing.assert_allclose(cross_gram(X, X, k), gram_matrix(X, k), rtol=1e-13)


def test_random_gram_is_psd(rng):
    for _ in range(20):
        X = rng.standard_normal((20, 3))
        rho = rng.gamma(0.5, 2.0, 3)
        K = gram_matrix(X, KernelParams(rho, 1.0))
        assert np.linalg.eigvalsh(K).min() >= -1e-8


def test_invalid_params():
    with pytest.raises(ValueError):
        KernelParams(np.array([-0.1]), 1.0)
    with pytest.raises(ValueError):
        KernelParams(np.array([0.1]), -1.0)
    with pytest.raises(ValueError):
        gram_matrix(np.zeros((3, 2)), KernelParams(np.array([1.0]), 1.0))


def test_jittered_cholesky_handles_duplicates():
    X = np.zeros((4, 1))
    K = gram_matrix(X, KernelParams(np.array([1.0]), 1.0))
    L = jittered_cholesky(K, 1.0)
    assert np.all(np.isfinite(L))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 12), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_gram_oracle_property(n, p, seed):
    r = np.random.default_rng(seed)
    X = r.standard_normal((n, p))
    rho = r.gamma(0.5, 2.0, p) * (r.random(p) < 0.7)
    K = gram_matrix(X, KernelParams(rho, 1.1))
    np.testing.assert_allclose(K, dense_kernel(X, X, rho, 1.1), rtol=1e-12, atol=1e-300)
