"""ARD squared-exponential covariance.

    c(x, x') = tau2 * exp(-sum_j rho_j (x_j - x'_j)^2)

``rho_j = 0`` removes exposure ``j``; only the nonzero weights are passed to
the Gram kernels.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend

JITTER = 1e-10


@dataclass(frozen=True)
class KernelParams:
    rho: np.ndarray
    tau2: float

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float).ravel()
        if np.any(rho < 0) or not np.all(np.isfinite(rho)):
            raise ValueError("rho must be finite and nonnegative")
        if not (self.tau2 >= 0 and np.isfinite(self.tau2)):
            raise ValueError("tau2 must be finite and nonnegative")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "tau2", float(self.tau2))

    @property
    def active(self):
        return np.flatnonzero(self.rho > 0)


def covariance(x, x_prime, k):
    x = np.asarray(x, dtype=float).ravel()
    x_prime = np.asarray(x_prime, dtype=float).ravel()
    if x.shape != x_prime.shape or x.shape != k.rho.shape:
        raise ValueError(
            f"dimension mismatch: {x.shape}, {x_prime.shape}, rho {k.rho.shape}"
        )
    s = 0.0
    for j in range(x.size):
        d = x[j] - x_prime[j]
        s = s + k.rho[j] * d * d
    return k.tau2 * float(np.exp(-s))


def _active_inputs(X, k):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != k.rho.size:
        raise ValueError(f"X must be (n, {k.rho.size}), got {X.shape}")
    idx = k.active
    return np.ascontiguousarray(X[:, idx]), np.ascontiguousarray(k.rho[idx])


def gram_matrix(X, k):
    """n x n matrix with entries ``covariance(x_i, x_l, k)``."""
    Xa, rho = _active_inputs(X, k)
    return backend.ard_gram(Xa, rho, k.tau2)


def cross_gram(A, B, k):
    """Rectangular covariance block between the rows of ``A`` and ``B``."""
    Aa, rho = _active_inputs(A, k)
    Ba, _ = _active_inputs(B, k)
    return backend.ard_cross(Aa, Ba, rho, k.tau2)


def jittered_cholesky(C, tau2):
    """Lower Cholesky factor of ``C + JITTER * tau2 * I``."""
    C = np.array(C, dtype=float)
    C[np.diag_indices_from(C)] += JITTER * tau2
    return np.linalg.cholesky(C)
