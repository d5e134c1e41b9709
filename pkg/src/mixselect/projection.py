"""Orthogonal-complement projector of the main-effects design.

``P = I - X (X^T X)^+ X^T`` is held implicitly through an orthonormal basis
``Q`` of ``col(X)`` so that ``P v = v - Q (Q^T v)`` costs O(n r).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

PINV_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class Projector:
    basis: np.ndarray
    source_rank: int
    rank_deficiency_handled: bool

    @property
    def n(self):
        return self.basis.shape[0]

    @cached_property
    def P(self):
        P = -self.basis @ self.basis.T
        P[np.diag_indices(self.n)] += 1.0
        return (P + P.T) / 2

    def apply(self, V):
        """Compute ``P @ V`` for a vector or a column block."""
        if self.basis.shape[1] == 0:
            return np.array(V, dtype=float, copy=True)
        return V - self.basis @ (self.basis.T @ V)


def projection_matrix(X_active):
    """Projector onto the orthogonal complement of ``col(X_active)``."""
    X = np.asarray(X_active, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("X_active must be an (n, d) matrix with n >= 1")
    if not np.all(np.isfinite(X)):
        raise ValueError("X_active contains non-finite entries")
    n, d = X.shape
    if d == 0:
        return Projector(np.zeros((n, 0)), 0, False)
    U, s, _ = np.linalg.svd(X, full_matrices=False)
    tol = PINV_RTOL * s[0] if s.size else 0.0
    rank = int(np.sum(s > tol)) if s.size and s[0] > 0 else 0
    return Projector(np.ascontiguousarray(U[:, :rank]), rank, rank < d)


def project_function_draws(g, P):
    g = np.asarray(g, dtype=float)
    if g.shape[0] != P.n:
        raise ValueError(f"length mismatch: g has {g.shape[0]}, projector {P.n}")
    return P.apply(g)


def projected_kernel(C, P):
    """``P C P^T``, symmetrized."""
    C = np.asarray(C, dtype=float)
    if C.shape != (P.n, P.n):
        raise ValueError(f"C must be ({P.n}, {P.n}), got {C.shape}")
    M = P.apply(P.apply(C).T)
    return (M + M.T) / 2
