"""Posterior prediction at new exposure/covariate values.

The projected process is extended to new points as
``g*(x) = g(x) - t(x)^T H g_n`` with ``H = pinv(T)`` and ``T`` the design
projected out during fitting, so that it agrees with ``P g_n`` on the
training rows.  Its conditional mean and variance given the training
residuals are computed per retained draw.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from ..kernel import KernelParams, cross_gram, gram_matrix
from ..lowrank import woodbury_inverse_apply
from .model import ModelData, interaction_effect


@dataclass
class Prediction:
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    alpha: float
    draws_mean: np.ndarray  # (S, n_new) mean function per draw
    draws_sd: np.ndarray  # (S, n_new) predictive sd per draw


def _model_for(samples):
    """Rebuild the chain's projector and probe matrix from the stored seed."""
    ss = np.random.SeedSequence(samples.seed)
    probe_ss = ss.spawn(3)[0]
    return ModelData(
        samples.y_train,
        samples.X_train,
        samples.Z_train,
        samples.prior,
        m=samples.m,
        oversampling=samples.oversampling,
        power_iters=samples.power_iters,
        projection=samples.projection,
        rng=np.random.default_rng(probe_ss),
    )


def _check_new(samples, X_new, Z_new):
    X_new = np.atleast_2d(np.asarray(X_new, dtype=float))
    n_new = X_new.shape[0]
    if X_new.shape[1] != samples.p:
        raise ValueError(f"X_new must have {samples.p} columns, got {X_new.shape[1]}")
    q = samples.alpha.shape[1]
    if Z_new is None:
        Z_new = np.zeros((n_new, 0))
    Z_new = np.asarray(Z_new, dtype=float).reshape(n_new, -1)
    if Z_new.shape[1] != q:
        raise ValueError(f"Z_new must have {q} columns, got {Z_new.shape[1]}")
    if not (np.all(np.isfinite(X_new)) and np.all(np.isfinite(Z_new))):
        raise ValueError("new data must be complete")
    return X_new, Z_new


class _GPDraw:
    """Per-draw weights for the projected-GP conditional mean.

    Only O(n) vectors are kept; the kernel matrix and factor are rebuilt on
    demand for variances.
    """

    def __init__(self, model, rho, tau_star, resid):
        self.rho = rho
        self.tau_star = tau_star
        self.tau2 = tau_star**2
        K, unit = self.operators(model)
        self.w = model.projector.apply(woodbury_inverse_apply(unit, resid))
        self.Kw = K @ self.w

    def operators(self, model):
        K = gram_matrix(model.X, KernelParams(self.rho, 1.0))
        unit = model.covariance(1.0, self.tau_star, model.kernel_factor(self.rho))
        return K, unit


def _gp_cache(samples, model):
    cache = samples.meta.get("_gp_cache")
    if cache is None:
        cache = {}
        for s in range(samples.n_draws):
            tau = samples.scalars["tau_star"][s]
            if not samples.scalars["gamma_tau"][s] or tau <= 0:
                continue
            resid = model.y - (
                model.X @ samples.beta[s]
                + interaction_effect(model.X, samples.lam_matrix(s))
                + model.Z @ samples.alpha[s]
            )
            cache[s] = _GPDraw(model, samples.rho[s], tau, resid)
        samples.meta["_gp_cache"] = cache
    return cache


def mean_draws(samples, X_new, Z_new=None, *, with_variance=False):
    """Mean function at new points for every retained draw.

    Returns ``(S, n_new)`` means, and, with ``with_variance``, the matching
    predictive variances (noise plus GP conditional variance).
    """
    X_new, Z_new = _check_new(samples, X_new, Z_new)
    model = _model_for(samples)
    T = model.design_for_projection(model.X, model.Z)
    H = np.linalg.pinv(T, rcond=1e-10)
    T_new = model.design_for_projection(X_new, Z_new)
    B = T_new @ H  # (n_new, n)
    cache = _gp_cache(samples, model)
    S, n_new = samples.n_draws, X_new.shape[0]
    means = np.empty((S, n_new))
    var = np.empty((S, n_new)) if with_variance else None
    for s in range(S):
        L = samples.lam_matrix(s)
        mu = X_new @ samples.beta[s] + interaction_effect(X_new, L) + Z_new @ samples.alpha[s]
        sigma2 = samples.scalars["sigma2"][s]
        g = cache.get(s)
        gvar = 0.0
        if g is not None:
            cross = cross_gram(X_new, model.X, KernelParams(g.rho, 1.0))
            mu = mu + g.tau2 * (cross @ g.w - B @ g.Kw)
            if with_variance:
                K, unit = g.operators(model)
                BK = B @ K
                A = g.tau2 * (cross - BK)
                prior_var = g.tau2 * (
                    1.0 - 2.0 * np.einsum("ij,ij->i", B, cross)
                    + np.einsum("ij,ij->i", BK, B)
                )
                PA = model.projector.apply(A.T)
                post = np.einsum("ij,ij->j", PA, woodbury_inverse_apply(unit, PA))
                gvar = np.maximum(prior_var - post, 0.0)
        means[s] = mu
        if with_variance:
            var[s] = sigma2 * (1.0 + gvar)
    return (means, var) if with_variance else means


def mixture_quantiles(means, sds, probs, iters=80):
    """Quantiles of the equal-weight normal mixture over draws, per column."""
    lo = np.min(means - 12 * sds, axis=0)
    hi = np.max(means + 12 * sds, axis=0)
    out = []
    for prob in probs:
        a, b = lo.copy(), hi.copy()
        for _ in range(iters):
            mid = 0.5 * (a + b)
            cdf = np.mean(ndtr((mid - means) / sds), axis=0)
            below = cdf < prob
            a = np.where(below, mid, a)
            b = np.where(below, b, mid)
        out.append(0.5 * (a + b))
    return out


def predict(samples, X_new, Z_new=None, alpha=0.05):
    """Posterior predictive mean and central ``100(1 - alpha)%`` intervals."""
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    means, var = mean_draws(samples, X_new, Z_new, with_variance=True)
    sds = np.sqrt(var)
    center = means.mean(axis=0)
    if alpha >= 1:
        med = mixture_quantiles(means, sds, [0.5])[0]
        lower = upper = med
    else:
        lower, upper = mixture_quantiles(means, sds, [alpha / 2, 1 - alpha / 2])
    return Prediction(center, lower, upper, alpha, means, sds)


def normal_interval(mean, sd, alpha):
    z = ndtri(1 - alpha / 2)
    return mean - z * sd, mean + z * sd
