"""Fixed (per iteration) quantities shared by the sampler steps."""
from __future__ import annotations

import numpy as np

from ..kernel import KernelParams, gram_matrix
from ..lowrank import (
    DEFAULT_OVERSAMPLING,
    DEFAULT_POWER_ITERS,
    LowRankFactor,
    MarginalCovariance,
    empty_factor,
    randomized_eig,
)
from ..projection import projection_matrix
from .state import PriorConfig

DEFAULT_M = 100


def default_order(n, m=None, oversampling=DEFAULT_OVERSAMPLING):
    """Clamp the approximation order and oversampling to the sample size."""
    m = min(n, DEFAULT_M) if m is None else min(int(m), n)
    if m <= 0:
        raise ValueError("approximation order m must be positive")
    return m, min(oversampling, n - m)


def interaction_effect(X, lam):
    """Row-wise ``sum_{j<k} lam_jk x_ij x_ik`` (the diagonal of X Lam X^T)."""
    if not lam.any():
        return np.zeros(X.shape[0])
    return np.einsum("ij,ij->i", X @ lam, X)


class ModelData:
    """Response, designs, projector and low-rank settings for one chain.

    ``projection`` selects the design whose column space is projected out of
    the Gaussian-process term: ``"full"`` uses ``[X | Z]``, ``"exposures"``
    uses ``X`` alone.
    """

    def __init__(
        self,
        y,
        X,
        Z,
        prior=None,
        *,
        m=None,
        oversampling=DEFAULT_OVERSAMPLING,
        power_iters=DEFAULT_POWER_ITERS,
        projection="full",
        rng=None,
    ):
        self.y = np.asarray(y, dtype=float)
        self.prior = prior or PriorConfig()
        if projection not in ("full", "exposures"):
            raise ValueError("projection must be 'full' or 'exposures'")
        self.projection = projection
        self.n = self.y.size
        self.m, self.oversampling = default_order(self.n, m, oversampling)
        self.power_iters = power_iters
        rng = rng if rng is not None else np.random.default_rng(0)
        # fixed probes: the factor is then a deterministic function of rho
        self.omega = rng.standard_normal((self.n, self.m + self.oversampling))
        self.set_design(X, Z)

    def set_design(self, X, Z):
        self.X = np.ascontiguousarray(X, dtype=float)
        self.Z = np.ascontiguousarray(Z, dtype=float).reshape(self.n, -1)
        self.p = self.X.shape[1]
        self.q = self.Z.shape[1]
        T = self.design_for_projection(self.X, self.Z)
        self.projector = projection_matrix(T)
        self.ones_proj = self.projector.apply(np.ones(self.n))

    def design_for_projection(self, X, Z):
        return np.hstack([X, Z]) if self.projection == "full" else X

    def pair_columns(self, pairs):
        if not len(pairs):
            return np.zeros((self.n, 0))
        j, k = np.asarray(pairs).T
        return self.X[:, j] * self.X[:, k]

    def mean(self, state):
        return (
            self.X @ state.beta
            + interaction_effect(self.X, state.lam)
            + self.Z @ state.alpha
        )

    def kernel_factor(self, rho):
        """Low-rank factor of ``P K(rho) P`` at unit amplitude."""
        n = self.n
        if not np.any(rho > 0):
            # constant kernel: P 1 1^T P has rank <= 1
            v = self.ones_proj
            nv = float(v @ v)
            if nv <= 1e-12 * n:
                return empty_factor(n)
            return LowRankFactor((v / np.sqrt(nv))[:, None], np.array([nv]), 0)
        K = gram_matrix(self.X, KernelParams(rho, 1.0))
        P = self.projector

        def op(V):
            return P.apply(K @ P.apply(V))

        return randomized_eig(
            op,
            self.m,
            self.oversampling,
            n=n,
            power_iters=self.power_iters,
            omega=self.omega,
        )

    def marginal_covariance(self, state, kfactor=None, tau_star=None, sigma2=None):
        """Marginal covariance of the response for ``state`` (overrides optional)."""
        return self.covariance(
            state.sigma2 if sigma2 is None else sigma2,
            state.tau_star if tau_star is None else tau_star,
            state.kfactor if kfactor is None else kfactor,
        )

    def covariance(self, sigma2, tau_star, kfactor):
        """``sigma2 * (I + tau_star**2 * P K P)`` through the unit-amplitude factor."""
        if not state_has_gp(tau_star, kfactor):
            return MarginalCovariance(sigma2, empty_factor(self.n))
        return MarginalCovariance(sigma2, kfactor.scaled(sigma2 * tau_star**2))


def state_has_gp(tau_star, kfactor):
    return tau_star > 0 and kfactor is not None and kfactor.m > 0
