"""Randomized low-rank eigendecomposition and the marginal-covariance algebra
built on it (Woodbury inverse, determinant lemma, Gaussian log-likelihood).

The marginal covariance is ``Sigma = sigma2 * I + U diag(D) U^T`` with
orthonormal ``U`` (n x m), so

    Sigma^{-1} v = (v - U diag(D / (sigma2 + D)) U^T v) / sigma2
    log|Sigma|   = n log sigma2 + sum_j log(1 + D_j / sigma2)
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_OVERSAMPLING = 10
DEFAULT_POWER_ITERS = 1
EIG_RTOL = 1e-12
LOG_2PI = np.log(2 * np.pi)


@dataclass(frozen=True, eq=False)
class LowRankFactor:
    U: np.ndarray
    D: np.ndarray
    oversampling: int = 0

    @property
    def m(self):
        return self.D.size

    @property
    def n(self):
        return self.U.shape[0]

    def scaled(self, c):
        """Factor of ``c * (U D U^T)``."""
        if c == 0:
            return empty_factor(self.n)
        return LowRankFactor(self.U, self.D * c, self.oversampling)

    def dense(self):
        return (self.U * self.D) @ self.U.T


def empty_factor(n):
    return LowRankFactor(np.zeros((n, 0)), np.zeros(0), 0)


def _as_operator(operator, n):
    if callable(operator) and not isinstance(operator, np.ndarray):
        if n is None:
            raise ValueError("n is required when operator is a callable")
        return operator, n
    M = np.asarray(operator, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("operator must be a square matrix or a callable")
    return (lambda V: M @ V), M.shape[0]


def randomized_eig(
    operator,
    m,
    oversampling=DEFAULT_OVERSAMPLING,
    seed=None,
    *,
    n=None,
    power_iters=DEFAULT_POWER_ITERS,
    omega=None,
):
    """Rank-``m`` eigendecomposition of a symmetric PSD operator.

    Parameters
    ----------
    operator : ndarray or callable
        Either the n x n matrix or a function computing ``A @ V`` for an
        n x k block ``V``.
    m : int
        Target order.
    oversampling : int
        Extra probe columns.
    seed : int or numpy Generator, optional
        Source of the Gaussian probe matrix (ignored when ``omega`` is given).
    n : int, optional
        Dimension, required for callables.
    power_iters : int
        Subspace iterations applied to the sketch.
    omega : ndarray, optional
        Explicit n x (m + oversampling) probe matrix, so that the result is a
        deterministic function of the operator.

    Returns
    -------
    LowRankFactor
        Eigenvalues sorted in decreasing order; eigenvalues below
        ``1e-12 * max`` (including negative round-off) are dropped.
    """
    apply, n = _as_operator(operator, n)
    if m <= 0:
        raise ValueError(f"m must be positive, got {m}")
    if oversampling < 0 or m + oversampling > n:
        raise ValueError(f"m + oversampling = {m + oversampling} exceeds n = {n}")
    ell = m + oversampling
    if omega is None:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        omega = rng.standard_normal((n, ell))
    elif omega.shape != (n, ell):
        raise ValueError(f"omega must be ({n}, {ell}), got {omega.shape}")

    Q, _ = np.linalg.qr(apply(omega))
    for _ in range(power_iters):
        Q, _ = np.linalg.qr(apply(Q))
    B = Q.T @ apply(Q)
    w, V = np.linalg.eigh((B + B.T) / 2)
    order = np.argsort(w)[::-1][:m]
    w, V = w[order], V[:, order]
    top = w[0] if w.size else 0.0
    keep = w > EIG_RTOL * top if top > 0 else np.zeros(w.size, dtype=bool)
    return LowRankFactor(np.ascontiguousarray(Q @ V[:, keep]), w[keep].copy(), oversampling)


@dataclass(frozen=True, eq=False)
class MarginalCovariance:
    """``sigma2 * I + U diag(D) U^T`` with cached Woodbury weights and log-determinant."""

    sigma2: float
    factor: LowRankFactor
    cached_inverse_core: np.ndarray = field(init=False)
    cached_logdet: float = field(init=False)

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive (Sigma is singular otherwise)")
        D = self.factor.D
        if np.any(D <= 0):
            raise ValueError("factor eigenvalues must be positive; drop zeros first")
        object.__setattr__(self, "cached_inverse_core", D / (self.sigma2 + D))
        object.__setattr__(
            self,
            "cached_logdet",
            self.factor.n * np.log(self.sigma2) + float(np.sum(np.log1p(D / self.sigma2))),
        )

    @property
    def n(self):
        return self.factor.n

    def dense(self):
        return self.sigma2 * np.eye(self.n) + self.factor.dense()


def woodbury_inverse_apply(mc, v):
    """``Sigma^{-1} v`` for a vector or an n x k block, in O(n m k)."""
    v = np.asarray(v, dtype=float)
    if v.shape[0] != mc.n:
        raise ValueError(f"length mismatch: {v.shape[0]} vs {mc.n}")
    U = mc.factor.U
    if U.shape[1] == 0:
        return v / mc.sigma2
    w = mc.cached_inverse_core
    if v.ndim == 1:
        return (v - U @ (w * (U.T @ v))) / mc.sigma2
    return (v - U @ (w[:, None] * (U.T @ v))) / mc.sigma2


def logdet(mc):
    return mc.cached_logdet


def log_marginal_likelihood(y, mean, mc):
    """``log N(y; mean, Sigma)``."""
    r = np.asarray(y, dtype=float) - np.asarray(mean, dtype=float)
    if r.shape != (mc.n,):
        raise ValueError(f"length mismatch: residual {r.shape}, covariance {mc.n}")
    if not np.all(np.isfinite(r)):
        raise FloatingPointError("non-finite residual in log-likelihood")
    quad = float(r @ woodbury_inverse_apply(mc, r))
    return -0.5 * (mc.n * LOG_2PI + mc.cached_logdet + quad)
