import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixselect.projection import project_function_draws, projected_kernel, \
    projection_matrix
from oracles import dense_projector


def test_matches_dense_formula(rng):
    X = rng.standard_normal((30, 4))
    P = projection_matrix(X)
    np.testing.assert_allclose(P.P, dense_projector(X), atol=1e-12)
    assert P.source_rank == 4 and not P.rank_deficiency_handled


def test_rank_deficient_design(rng):
    X = rng.standard_normal((25, 3))
    X = np.column_stack([X, X[:, 0] + X[:, 1]])
    P = projection_matrix(X)
    assert P.source_rank == 3 and P.rank_deficiency_handled
    np.testing.assert_allclose(P.P @ X, 0, atol=1e-10)
    assert np.trace(P.P) == pytest.approx(22)


def test_empty_design_is_identity():
    P = projection_matrix(np.zeros((5, 0)))
    np.testing.assert_array_equal(P.P, np.eye(5))


def test_apply_equals_dense(rng):
    X = rng.standard_normal((20, 3))
    P = projection_matrix(X)
    V = rng.standard_normal((20, 4))
    np.testing.assert_allclose(P.apply(V), P.P @ V, atol=1e-12)
    g = rng.standard_normal(20)
    np.testing.assert_allclose(project_function_draws(g, P), P.P @ g, atol=1e-12)


def test_projected_kernel_of_identity_is_projector(rng):
    X = rng.standard_normal((15, 2))
    P = projection_matrix(X)
    np.testing.assert_allclose(projected_kernel(np.eye(15), P), P.P, atol=1e-12)


def test_non_finite_design_rejected():
    with pytest.raises(ValueError):
        projection_matrix(np.array([[1.0], [np.nan]]))


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 30), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_projection_invariants(n, d, seed):
    r = np.random.default_rng(seed)
    d = min(d, n - 1)
    X = r.standard_normal((n, d))
    P = projection_matrix(X).P
    np.testing.assert_allclose(P @ P, P, atol=1e-9)
    np.testing.assert_allclose(P, P.T, atol=1e-9)
    np.testing.assert_allclose(P @ X, 0, atol=1e-9)
    assert abs(np.trace(P) - (n - np.linalg.matrix_rank(X))) < 1e-9
    g = r.standard_normal(n)
    assert np.sum((P @ g) ** 2) <= np.sum(g**2) + 1e-9
