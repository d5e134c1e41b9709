"""The Gibbs / Metropolis-Hastings updates of one MixSelect sweep.

Every step mutates ``state`` in place and returns it.  Coefficient blocks
are updated with the block integrated out of the inclusion decision
(collapsed spike-and-slab), then drawn from their conjugate normal
conditional.  Nonlinear hyperparameters use add/delete moves with the prior
slab as proposal plus log-scale random-walk refreshes, all scored by the
exact log marginal likelihood of the projected-GP model.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.special import expit

from ..lowrank import log_marginal_likelihood, woodbury_inverse_apply
from .model import interaction_effect
from .state import heredity_mask, n_admissible, safe_log


def _logit(prob):
    return safe_log(prob) - safe_log(1.0 - prob)


def _collapsed_score(G, b, idx, prior_prec):
    """Log marginal likelihood (up to a constant) of the columns ``idx``.

    ``-0.5 log|I + G_S / prec| + 0.5 b_S^T (G_S + prec I)^{-1} b_S`` where
    ``G = X^T Sigma^{-1} X`` and ``b = X^T Sigma^{-1} r``.
    """
    if len(idx) == 0:
        return 0.0
    A = G[np.ix_(idx, idx)].copy()
    A[np.diag_indices_from(A)] += prior_prec
    L = cholesky(A, lower=True, check_finite=False)
    z = solve_triangular(L, b[idx], lower=True, check_finite=False)
    return (
        -np.sum(np.log(np.diag(L)))
        + 0.5 * len(idx) * np.log(prior_prec)
        + 0.5 * float(z @ z)
    )


def _draw_coefficients(G, b, idx, prior_prec, rng):
    """Draw from ``N(V b_S, V)``, ``V = (G_S + prec I)^{-1}``."""
    A = G[np.ix_(idx, idx)].copy()
    A[np.diag_indices_from(A)] += prior_prec
    L = cholesky(A, lower=True, check_finite=False)
    mean = cho_solve((L, True), b[idx], check_finite=False)
    noise = solve_triangular(L.T, rng.standard_normal(len(idx)), lower=False,
                             check_finite=False)
    return mean + noise


def _pinned_main_effects(state, mode):
    """Main effects that must stay on because they support an active interaction."""
    pinned = np.zeros(state.p, dtype=bool)
    for j, k in zip(*np.nonzero(state.delta)):
        if mode == "strong":
            pinned[j] = pinned[k] = True
        else:
            if not state.gamma[k]:
                pinned[j] = True
            if not state.gamma[j]:
                pinned[k] = True
    return pinned


def step_gamma_main(state, model, mc, rng):
    """Resample each main-effect indicator with ``beta`` integrated out."""
    prior = model.prior
    prec = 1.0 / prior.slab_sd**2
    r = model.y - model.Z @ state.alpha - interaction_effect(model.X, state.lam)
    SX = woodbury_inverse_apply(mc, model.X)
    G = model.X.T @ SX
    b = SX.T @ r
    log_odds_prior = _logit(state.pi)
    log_keep_int = safe_log(1.0 - state.pi_int)
    pinned = _pinned_main_effects(state, prior.heredity) if prior.interactions else None
    gamma = state.gamma
    for j in range(model.p):
        if pinned is not None and pinned[j]:
            gamma[j] = True
            rng.random()  # keep the stream aligned across configurations
            continue
        gamma[j] = True
        on = np.flatnonzero(gamma)
        a_on = n_admissible(gamma, prior.heredity) if prior.interactions else 0
        gamma[j] = False
        off = np.flatnonzero(gamma)
        a_off = n_admissible(gamma, prior.heredity) if prior.interactions else 0
        log_odds = log_odds_prior
        if a_on != a_off:
            log_odds = log_odds + (a_on - a_off) * log_keep_int
        if np.isfinite(log_odds):
            log_odds += _collapsed_score(G, b, on, prec) - _collapsed_score(G, b, off, prec)
        gamma[j] = rng.random() < expit(log_odds)
    state.beta[~gamma] = 0.0
    return state


def step_pi(state, prior, rng):
    k = int(np.sum(state.gamma))
    state.pi = rng.beta(prior.a_pi + k, prior.b_pi + state.p - k)
    return state


def step_beta(state, model, mc, rng):
    """Draw the active main effects from their conjugate normal conditional."""
    state.beta[:] = 0.0
    idx = np.flatnonzero(state.gamma)
    if idx.size == 0:
        return state
    prec = 1.0 / model.prior.slab_sd**2
    r = model.y - model.Z @ state.alpha - interaction_effect(model.X, state.lam)
    Xa = model.X[:, idx]
    SX = woodbury_inverse_apply(mc, Xa)
    G = Xa.T @ SX
    b = SX.T @ r
    state.beta[idx] = _draw_coefficients(G, b, np.arange(idx.size), prec, rng)
    return state


def step_lambda(state, model, mc, rng):
    """Heredity-masked spike-and-slab update of the pairwise interactions.

    Pairs outside the heredity mask are zeroed; inside it each inclusion
    indicator is resampled with the interaction block integrated out, the
    active coefficients are drawn jointly, and the interaction inclusion
    probability is refreshed from its Beta conditional.
    """
    prior = model.prior
    mask = sorted(heredity_mask(state.gamma, prior.heredity))
    keep = np.zeros_like(state.delta)
    for j, k in mask:
        keep[j, k] = True
    state.delta &= keep
    state.lam[~state.delta] = 0.0
    if mask:
        prec = 1.0 / prior.slab_sd**2
        pairs = np.array(mask)
        W = model.pair_columns(pairs)
        r = model.y - model.Z @ state.alpha - model.X @ state.beta
        SW = woodbury_inverse_apply(mc, W)
        G = W.T @ SW
        b = SW.T @ r
        on = state.delta[pairs[:, 0], pairs[:, 1]].copy()
        log_odds_prior = _logit(state.pi_int)
        for i in range(len(mask)):
            on[i] = True
            s1 = _collapsed_score(G, b, np.flatnonzero(on), prec) if np.isfinite(log_odds_prior) else 0.0
            on[i] = False
            s0 = _collapsed_score(G, b, np.flatnonzero(on), prec) if np.isfinite(log_odds_prior) else 0.0
            on[i] = rng.random() < expit(log_odds_prior + s1 - s0)
        state.lam[:] = 0.0
        state.delta[:] = False
        act = np.flatnonzero(on)
        if act.size:
            vals = _draw_coefficients(G, b, act, prec, rng)
            state.lam[pairs[act, 0], pairs[act, 1]] = vals
            state.delta[pairs[act, 0], pairs[act, 1]] = True
    n_on = int(state.delta.sum())
    state.pi_int = rng.beta(prior.a_pi + n_on, prior.b_pi + len(mask) - n_on)
    return state


def step_alpha(state, model, mc, rng):
    """Covariate coefficients from their conjugate normal conditional (no selection)."""
    if model.q == 0:
        return state
    prec = 1.0 / model.prior.slab_sd**2
    r = model.y - model.X @ state.beta - interaction_effect(model.X, state.lam)
    SZ = woodbury_inverse_apply(mc, model.Z)
    G = model.Z.T @ SZ
    b = SZ.T @ r
    state.alpha[:] = _draw_coefficients(G, b, np.arange(model.q), prec, rng)
    return state


def _loglik(model, state, resid, kfactor, tau_star):
    mc = model.marginal_covariance(state, kfactor=kfactor, tau_star=tau_star)
    return log_marginal_likelihood(resid, 0.0, mc)


def _zero_nonlinear(state):
    state.rho[:] = 0.0
    state.gamma_rho[:] = False
    state.tau_star = 0.0
    state.gamma_tau = False
    state.kfactor = None


def step_rho_add_delete(state, model, rng):
    """Add/delete move on every smoothness parameter.

    Returns ``(state, mc)`` with the marginal covariance of the final state.
    """
    if not state.gamma_tau:
        _zero_nonlinear(state)
        return state, model.marginal_covariance(state)
    slab = model.prior.rho_slab
    resid = model.y - model.mean(state)
    cur = _loglik(model, state, resid, state.kfactor, state.tau_star)
    log_phi = safe_log(state.varphi)
    log_1m_phi = safe_log(1.0 - state.varphi)
    for j in range(model.p):
        rho_new = state.rho.copy()
        if state.rho[j] > 0:
            rho_new[j] = 0.0
            log_prior_ratio = log_1m_phi - log_phi
        else:
            rho_new[j] = slab.sample(rng)
            log_prior_ratio = log_phi - log_1m_phi
        u = rng.random()
        if not np.isfinite(log_prior_ratio) and log_prior_ratio < 0:
            continue
        f_new = model.kernel_factor(rho_new)
        ll = _loglik(model, state, resid, f_new, state.tau_star)
        if np.log(u) < ll - cur + log_prior_ratio:
            state.rho = rho_new
            state.gamma_rho = rho_new > 0
            state.kfactor = f_new
            cur = ll
    return state, model.marginal_covariance(state)


def step_rho_gibbs_refresh(state, model, rng):
    """Log-scale random-walk MH refresh of every active smoothness parameter."""
    if not state.gamma_tau or not np.any(state.rho > 0):
        return state
    slab = model.prior.rho_slab
    sd = model.prior.rw_sd
    resid = model.y - model.mean(state)
    cur = _loglik(model, state, resid, state.kfactor, state.tau_star)
    for j in np.flatnonzero(state.rho > 0):
        old = state.rho[j]
        new = old * np.exp(sd * rng.standard_normal())
        u = rng.random()
        rho_new = state.rho.copy()
        rho_new[j] = new
        f_new = model.kernel_factor(rho_new)
        ll = _loglik(model, state, resid, f_new, state.tau_star)
        log_ratio = (
            ll - cur
            + float(slab.logpdf(new) - slab.logpdf(old))
            + np.log(new / old)
        )
        if np.log(u) < log_ratio:
            state.rho = rho_new
            state.kfactor = f_new
            cur = ll
    return state


def step_varphi(state, prior, rng):
    """Nonlinear inclusion probability; drawn from its prior while gamma_tau is off."""
    if state.gamma_tau:
        k = int(np.sum(state.gamma_rho))
        state.varphi = rng.beta(prior.a_varphi + k, prior.b_varphi + state.p - k)
    else:
        state.varphi = rng.beta(prior.a_varphi, prior.b_varphi)
    return state


def step_tau(state, model, rng):
    """Add/delete move on ``gamma_tau`` followed by a refresh of ``tau_star``.

    The add move draws ``tau_star``, the ``gamma_rho`` indicators and the
    active ``rho`` from their priors, so the acceptance ratio reduces to the
    likelihood ratio times the Bernoulli prior odds of ``gamma_tau``.
    Returns ``(state, mc)``.
    """
    prior = model.prior
    resid = model.y - model.mean(state)
    cur = _loglik(model, state, resid, state.kfactor, state.tau_star)
    log_odds = np.log(prior.tau_spike_prob) - np.log1p(-prior.tau_spike_prob)
    if not state.gamma_tau:
        tau_new = float(prior.tau_slab.sample(rng))
        g_new = rng.random(model.p) < state.varphi
        rho_new = np.zeros(model.p)
        if g_new.any():
            rho_new[g_new] = prior.rho_slab.sample(rng, size=int(g_new.sum()))
        u = rng.random()
        f_new = model.kernel_factor(rho_new)
        ll = _loglik(model, state, resid, f_new, tau_new)
        if np.log(u) < ll - cur + log_odds:
            state.gamma_tau = True
            state.tau_star = tau_new
            state.rho = rho_new
            state.gamma_rho = g_new
            state.kfactor = f_new
            cur = ll
    else:
        u = rng.random()
        ll = _loglik(model, state, resid, None, 0.0)
        if np.log(u) < ll - cur - log_odds:
            _zero_nonlinear(state)
            cur = ll
    if state.gamma_tau:
        old = state.tau_star
        new = old * np.exp(prior.rw_sd * rng.standard_normal())
        u = rng.random()
        ll = _loglik(model, state, resid, state.kfactor, new)
        log_ratio = (
            ll - cur
            + float(prior.tau_slab.logpdf(new) - prior.tau_slab.logpdf(old))
            + np.log(new / old)
        )
        if np.log(u) < log_ratio:
            state.tau_star = new
    return state, model.marginal_covariance(state)


def step_sigma2(state, model, rng):
    """Inverse-gamma draw of the noise variance under ``tau = tau_star * sigma``."""
    prior = model.prior
    resid = model.y - model.mean(state)
    unit = model.marginal_covariance(state, sigma2=1.0)
    quad = float(resid @ woodbury_inverse_apply(unit, resid))
    shape = prior.sigma_shape + 0.5 * model.n
    rate = prior.sigma_rate + 0.5 * quad
    state.sigma2 = rate / rng.gamma(shape)
    return state
