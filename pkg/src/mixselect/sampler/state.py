"""Parameter containers for the MixSelect sampler."""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from math import comb, lgamma, log

import numpy as np

HEREDITY_MODES = ("strong", "weak")


@dataclass(frozen=True)
class GammaSlab:
    """Gamma(shape, rate) slab used for rho_j and tau*."""

    shape: float = 0.5
    rate: float = 0.5

    def sample(self, rng, size=None):
        return rng.gamma(self.shape, 1.0 / self.rate, size=size)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        return (
            self.shape * np.log(self.rate)
            - lgamma(self.shape)
            + (self.shape - 1) * np.log(x)
            - self.rate * x
        )


@dataclass(frozen=True)
class PriorConfig:
    a_pi: float = 1.0
    b_pi: float = 1.0
    a_varphi: float = 1.0
    b_varphi: float = 1.0
    heredity: str = "strong"
    slab_sd: float = 1.0
    rho_slab: object = GammaSlab()
    tau_slab: object = GammaSlab()
    tau_spike_prob: float = 0.5
    sigma_shape: float = 0.5
    sigma_rate: float = 0.5
    # switches for reduced models
    interactions: bool = True
    nonlinear: bool = True
    rw_sd: float = 0.3

    def __post_init__(self):
        if self.heredity not in HEREDITY_MODES:
            raise ValueError(f"heredity must be one of {HEREDITY_MODES}")
        for name in ("a_pi", "b_pi", "a_varphi", "b_varphi", "slab_sd",
                     "sigma_shape", "sigma_rate", "rw_sd"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.tau_spike_prob < 1:
            raise ValueError("tau_spike_prob must lie in (0, 1)")

    def to_dict(self):
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, GammaSlab):
                v = {"shape": v.shape, "rate": v.rate}
            out[f.name] = v
        return out

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for key in ("rho_slab", "tau_slab"):
            if isinstance(d.get(key), dict):
                d[key] = GammaSlab(**d[key])
        return cls(**d)


@dataclass
class ModelState:
    """One draw of every sampled quantity.

    ``lam`` is the strictly upper-triangular interaction matrix and ``delta``
    its inclusion pattern.  ``kfactor`` caches the low-rank factor of the
    projected kernel at unit amplitude for the current ``rho`` (``None``
    when ``gamma_tau`` is off); the marginal covariance is
    ``sigma2 * (I + tau_star**2 * U D U^T)``.
    """

    beta: np.ndarray
    gamma: np.ndarray
    lam: np.ndarray
    delta: np.ndarray
    alpha: np.ndarray
    rho: np.ndarray
    gamma_rho: np.ndarray
    tau_star: float
    gamma_tau: bool
    sigma2: float
    pi: float
    varphi: float
    pi_int: float
    kfactor: object = field(default=None, repr=False)

    @classmethod
    def initial(cls, p, q, sigma2=1.0, nonlinear=True):
        return cls(
            beta=np.zeros(p),
            gamma=np.ones(p, dtype=bool),
            lam=np.zeros((p, p)),
            delta=np.zeros((p, p), dtype=bool),
            alpha=np.zeros(q),
            rho=np.zeros(p),
            gamma_rho=np.zeros(p, dtype=bool),
            tau_star=0.0,
            gamma_tau=False,
            sigma2=float(sigma2),
            pi=0.5,
            varphi=0.5,
            pi_int=0.5,
        )

    def copy(self):
        return replace(
            self,
            beta=self.beta.copy(),
            gamma=self.gamma.copy(),
            lam=self.lam.copy(),
            delta=self.delta.copy(),
            alpha=self.alpha.copy(),
            rho=self.rho.copy(),
            gamma_rho=self.gamma_rho.copy(),
        )

    @property
    def p(self):
        return self.beta.size

    def is_finite(self):
        return bool(
            np.all(np.isfinite(self.beta))
            and np.all(np.isfinite(self.lam))
            and np.all(np.isfinite(self.alpha))
            and np.all(np.isfinite(self.rho))
            and np.isfinite(self.tau_star)
            and np.isfinite(self.sigma2)
            and self.sigma2 > 0
        )

    def invariant_violations(self, heredity):
        """List of broken invariants (empty when the state is consistent)."""
        bad = []
        if np.any(self.beta[~self.gamma] != 0):
            bad.append("beta nonzero where gamma is off")
        if np.any(np.tril(self.lam) != 0) or np.any(np.tril(self.delta)):
            bad.append("interaction matrix not strictly upper triangular")
        if np.any((self.lam != 0) != self.delta):
            bad.append("lambda support differs from delta")
        j, k = np.nonzero(self.delta)
        if heredity == "strong" and not np.all(self.gamma[j] & self.gamma[k]):
            bad.append("strong heredity violated")
        if heredity == "weak" and not np.all(self.gamma[j] | self.gamma[k]):
            bad.append("weak heredity violated")
        if not self.gamma_tau:
            if self.tau_star != 0 or np.any(self.rho != 0) or np.any(self.gamma_rho):
                bad.append("gamma_tau off but nonlinear parameters nonzero")
        if np.any((self.rho != 0) != (self.gamma_rho & self.gamma_tau)):
            bad.append("rho support differs from gamma_rho & gamma_tau")
        if np.any(self.rho < 0) or self.tau_star < 0:
            bad.append("negative rho or tau_star")
        if not 0 <= self.pi <= 1 or not 0 <= self.varphi <= 1:
            bad.append("probability outside [0, 1]")
        return bad


def heredity_mask(gamma, mode):
    """Admissible interaction pairs ``(j, k)``, ``j < k`` (0-based)."""
    gamma = np.asarray(gamma, dtype=bool)
    if mode == "strong":
        ok = gamma[:, None] & gamma[None, :]
    elif mode == "weak":
        ok = gamma[:, None] | gamma[None, :]
    else:
        raise ValueError(f"unknown heredity mode {mode!r}")
    return {(int(j), int(k)) for j, k in zip(*np.nonzero(np.triu(ok, 1)))}


def n_admissible(gamma, mode):
    """Size of the heredity mask, without building it."""
    i = int(np.sum(gamma))
    p = len(gamma)
    if mode == "strong":
        return i * (i - 1) // 2
    return p * i - i * (i + 1) // 2


def count_models(p, mode):
    """Number of (main-effect, interaction-support) models on ``p`` exposures."""
    if p < 0:
        raise ValueError("p must be nonnegative")
    if mode == "none":
        return 2 ** (p + comb(p, 2))
    if mode == "strong":
        return sum(comb(p, i) * 2 ** comb(i, 2) for i in range(p + 1))
    if mode == "weak":
        return sum(comb(p, i) * 2 ** (p * i - i * (i + 1) // 2) for i in range(p + 1))
    raise ValueError(f"unknown mode {mode!r}")


def log_beta_fn(a, b):
    return lgamma(a) + lgamma(b) - lgamma(a + b)


def safe_log(x):
    return log(x) if x > 0 else -np.inf
