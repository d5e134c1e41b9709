"""Chain orchestration: one sweep of every update per iteration, recording
post-burn-in draws."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ..data import Dataset
from .model import ModelData
from .state import ModelState, PriorConfig
from .steps import (
    step_alpha,
    step_beta,
    step_gamma_main,
    step_lambda,
    step_pi,
    step_rho_add_delete,
    step_rho_gibbs_refresh,
    step_sigma2,
    step_tau,
    step_varphi,
)

log = logging.getLogger(__name__)

SCALAR_NAMES = ("sigma2", "tau_star", "gamma_tau", "pi", "varphi", "pi_int")


class SamplerError(RuntimeError):
    def __init__(self, iteration, step, detail="non-finite value"):
        self.iteration = iteration
        self.step = step
        super().__init__(f"{detail} at iteration {iteration}, step {step}")


def pair_labels(names):
    p = len(names)
    return [f"{names[j]}:{names[k]}" for j in range(p) for k in range(j + 1, p)]


@dataclass
class PosteriorSamples:
    """Retained draws plus what prediction needs to reuse them.

    Interaction draws are stored as vectors over the pairs ``(j, k)``,
    ``j < k`` in row-major order.
    """

    beta: np.ndarray
    lam: np.ndarray
    alpha: np.ndarray
    rho: np.ndarray
    scalars: dict
    x_names: list
    z_names: list
    prior: PriorConfig
    seed: int
    iterations: int
    burn_in: int
    thin: int
    m: int
    oversampling: int
    power_iters: int
    projection: str
    # training data on the model scale (completed posterior mean if imputed)
    y_train: np.ndarray
    X_train: np.ndarray
    Z_train: np.ndarray
    chain: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.chain is None:
            self.chain = np.zeros(self.n_draws, dtype=int)

    @property
    def n_draws(self):
        return self.beta.shape[0]

    @property
    def p(self):
        return self.beta.shape[1]

    @property
    def pairs(self):
        return np.array([(j, k) for j in range(self.p) for k in range(j + 1, self.p)],
                        dtype=int).reshape(-1, 2)

    def lam_matrix(self, s):
        L = np.zeros((self.p, self.p))
        pr = self.pairs
        if len(pr):
            L[pr[:, 0], pr[:, 1]] = self.lam[s]
        return L

    def main_inclusion(self):
        return np.mean(self.beta != 0, axis=0)

    def interaction_inclusion(self):
        """p x p upper-triangular matrix of posterior inclusion frequencies."""
        M = np.zeros((self.p, self.p))
        pr = self.pairs
        if len(pr):
            M[pr[:, 0], pr[:, 1]] = np.mean(self.lam != 0, axis=0)
        return M

    def nonlinear_inclusion(self):
        return np.mean(self.rho > 0, axis=0)

    def interaction_mean(self):
        M = np.zeros((self.p, self.p))
        pr = self.pairs
        if len(pr):
            M[pr[:, 0], pr[:, 1]] = self.lam.mean(axis=0)
        return M

    def prob_nonlinear(self):
        return float(np.mean(self.scalars["gamma_tau"]))

    def concat(self, other):
        """Stack the draws of another chain fitted to the same data."""
        out = PosteriorSamples(**{**self.__dict__})
        out.beta = np.vstack([self.beta, other.beta])
        out.lam = np.vstack([self.lam, other.lam])
        out.alpha = np.vstack([self.alpha, other.alpha])
        out.rho = np.vstack([self.rho, other.rho])
        out.scalars = {k: np.concatenate([self.scalars[k], other.scalars[k]])
                       for k in self.scalars}
        out.chain = np.concatenate([self.chain, other.chain])
        return out


def initial_state(model, nonlinear=True):
    p, q = model.p, model.q
    state = ModelState.initial(p, q, sigma2=max(float(np.var(model.y)), 1e-3))
    if nonlinear and model.prior.nonlinear and p > 0:
        state.gamma_tau = True
        state.tau_star = 1.0
        state.rho = np.full(p, 1.0 / p)
        state.gamma_rho = np.ones(p, dtype=bool)
        state.kfactor = model.kernel_factor(state.rho)
    return state


def run_chain(
    data,
    prior=None,
    iterations=2000,
    burn_in=None,
    seed=0,
    m=None,
    *,
    thin=1,
    oversampling=10,
    power_iters=1,
    projection="full",
    imputer=None,
    check_invariants=False,
    init=None,
    chain_id=0,
    progress=False,
):
    """Run one MixSelect chain.

    Parameters
    ----------
    data : Dataset
        Model-scale data.  Unobserved cells require ``imputer``.
    prior : PriorConfig
    iterations, burn_in, thin : int
        ``burn_in`` defaults to 80% of ``iterations``.
    seed : int
        Seeds every random stream of the chain.
    m : int, optional
        Low-rank order, default ``min(n, 100)``.
    imputer : FactorImputer, optional
        When given, a cut-of-feedback imputation sweep precedes each
        iteration; it draws from its own random stream.
    check_invariants : bool
        Assert the state invariants after every iteration.
    init : ModelState, optional
        Starting state (copied).

    Returns
    -------
    PosteriorSamples
    """
    prior = prior or PriorConfig()
    if burn_in is None:
        burn_in = int(0.8 * iterations)
    if not 0 <= burn_in < iterations:
        raise ValueError("burn_in must satisfy 0 <= burn_in < iterations")
    if thin < 1:
        raise ValueError("thin must be >= 1")
    if not isinstance(data, Dataset):
        raise TypeError("data must be a Dataset")
    if not data.is_complete and imputer is None:
        raise ValueError("data has unobserved cells; pass an imputer")

    ss = np.random.SeedSequence(seed)
    probe_ss, chain_ss, impute_ss = ss.spawn(3)
    rng = np.random.default_rng(chain_ss)
    impute_rng = np.random.default_rng(impute_ss)

    if imputer is not None:
        data = imputer.initialize(data, impute_rng)
    model = ModelData(
        data.y, data.X, data.Z, prior,
        m=m, oversampling=oversampling, power_iters=power_iters,
        projection=projection, rng=np.random.default_rng(probe_ss),
    )
    state = init.copy() if init is not None else initial_state(model)
    if not state.is_finite() or not state.sigma2 > 0:
        raise ValueError("initial state must be finite with sigma2 > 0")
    if state.gamma_tau and state.kfactor is None:
        state.kfactor = model.kernel_factor(state.rho)

    n_keep = len(range(burn_in, iterations, thin))
    p, q = model.p, model.q
    npairs = p * (p - 1) // 2
    iu = np.triu_indices(p, 1)
    rec_beta = np.zeros((n_keep, p))
    rec_lam = np.zeros((n_keep, npairs))
    rec_alpha = np.zeros((n_keep, q))
    rec_rho = np.zeros((n_keep, p))
    rec_scalar = {k: np.zeros(n_keep) for k in SCALAR_NAMES}
    W_sum = np.zeros((model.n, p + q))

    t0 = time.perf_counter()
    s = 0
    for it in range(iterations):
        if imputer is not None:
            data = imputer.sweep(data, impute_rng)
            model.set_design(data.X, data.Z)
            if state.gamma_tau:
                state.kfactor = model.kernel_factor(state.rho)
        sweep(state, model, rng, it)
        if check_invariants:
            bad = state.invariant_violations(prior.heredity)
            if bad:
                raise SamplerError(it, "invariants", "; ".join(bad))
        if it >= burn_in and (it - burn_in) % thin == 0:
            rec_beta[s] = state.beta
            rec_lam[s] = state.lam[iu]
            rec_alpha[s] = state.alpha
            rec_rho[s] = state.rho
            for k in SCALAR_NAMES:
                rec_scalar[k][s] = float(getattr(state, k))
            if imputer is not None:
                W_sum += np.hstack([data.X, data.Z])
            s += 1
        if progress and (it + 1) % max(1, iterations // 10) == 0:
            log.info("chain %d: iteration %d/%d", chain_id, it + 1, iterations)
    elapsed = time.perf_counter() - t0

    if imputer is not None:
        W_mean = W_sum / max(n_keep, 1)
        X_train, Z_train = W_mean[:, :p], W_mean[:, p:]
    else:
        X_train, Z_train = model.X.copy(), model.Z.copy()
    return PosteriorSamples(
        beta=rec_beta,
        lam=rec_lam,
        alpha=rec_alpha,
        rho=rec_rho,
        scalars=rec_scalar,
        x_names=list(data.x_names),
        z_names=list(data.z_names),
        prior=prior,
        seed=seed,
        iterations=iterations,
        burn_in=burn_in,
        thin=thin,
        m=model.m,
        oversampling=model.oversampling,
        power_iters=power_iters,
        projection=projection,
        y_train=model.y.copy(),
        X_train=X_train,
        Z_train=Z_train,
        chain=np.full(n_keep, chain_id, dtype=int),
        meta={"elapsed_seconds": elapsed, "final_state": state,
              "imputer": imputer},
    )


def sweep(state, model, rng, it=0):
    """One pass over every update, in place, for the current ``model`` data."""
    prior = model.prior
    mc = model.marginal_covariance(state)
    _run(it, "gamma", step_gamma_main, state, model, mc, rng)
    _run(it, "pi", step_pi, state, prior, rng)
    _run(it, "beta", step_beta, state, model, mc, rng)
    if prior.interactions:
        _run(it, "lambda", step_lambda, state, model, mc, rng)
    _run(it, "alpha", step_alpha, state, model, mc, rng)
    if prior.nonlinear:
        _run(it, "rho_add_delete", step_rho_add_delete, state, model, rng)
        _run(it, "rho_refresh", step_rho_gibbs_refresh, state, model, rng)
        _run(it, "varphi", step_varphi, state, prior, rng)
        _run(it, "tau", step_tau, state, model, rng)
    _run(it, "sigma2", step_sigma2, state, model, rng)
    return state


def _run(it, name, fn, state, *args):
    try:
        with np.errstate(divide="ignore", over="ignore"):
            fn(state, *args)
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        raise SamplerError(it, name, str(exc)) from exc
    if not state.is_finite():
        raise SamplerError(it, name)


def _chain_worker(kwargs):
    return run_chain(**kwargs)


def run_chains(data, prior=None, iterations=2000, burn_in=None, seed=0, m=None,
               chains=1, jobs=1, **kwargs):
    """Run independent chains with spawned seeds and stack their draws."""
    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(chains)]
    if chains == 1:
        seeds = [seed]
    args = [
        dict(data=data, prior=prior, iterations=iterations, burn_in=burn_in,
             seed=s, m=m, chain_id=c, **kwargs)
        for c, s in enumerate(seeds)
    ]
    if jobs > 1 and chains > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=min(jobs, chains)) as ex:
            results = list(ex.map(_chain_worker, args))
    else:
        results = [_chain_worker(a) for a in args]
    out = results[0]
    for r in results[1:]:
        out = out.concat(r)
    out.seed = seed
    # the imputer of the last chain (a copy when chains ran in worker processes)
    out.meta = {**out.meta, "imputer": results[-1].meta["imputer"],
                "elapsed_seconds": sum(r.meta["elapsed_seconds"] for r in results)}
    return out
