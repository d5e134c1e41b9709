"""Evaluation metrics and MCMC convergence diagnostics."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import ndtr

from .sampler.predict import mean_draws, mixture_quantiles

GEWEKE_LAGS = 8


def frobenius_distance(A, B):
    """``sqrt(trace((A - B)^T (A - B)))``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch: {A.shape} vs {B.shape}")
    return float(np.linalg.norm(A - B))


def test_mse(y_true, y_pred):
    """Mean squared prediction error."""
    y_true = np.asarray(y_true, dtype=float).ravel()
    y_pred = np.asarray(y_pred, dtype=float).ravel()
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {y_true.size} vs {y_pred.size}")
    if y_true.size == 0:
        raise ValueError("empty input")
    return float(np.mean((y_true - y_pred) ** 2))


test_mse.__test__ = False  # not a pytest test despite the name


@dataclass(frozen=True)
class SelectionTruth:
    """True supports with 1-based exposure indices.

    ``interactions`` holds pairs ``(j, k)`` with ``j < k``.
    """

    p: int
    main: frozenset = frozenset()
    interactions: frozenset = frozenset()
    nonlinear: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "main", frozenset(int(j) for j in self.main))
        object.__setattr__(self, "nonlinear", frozenset(int(j) for j in self.nonlinear))
        pairs = frozenset(tuple(sorted((int(a), int(b)))) for a, b in self.interactions)
        object.__setattr__(self, "interactions", pairs)
        for j in self.main | self.nonlinear | {x for pr in pairs for x in pr}:
            if not 1 <= j <= self.p:
                raise ValueError(f"index {j} outside 1..{self.p}")
        if any(a == b for a, b in pairs):
            raise ValueError("interaction pairs need distinct indices")

    def interaction_matrix(self, values=None):
        """Upper-triangular 0/1 (or ``values``) matrix of the true pairs."""
        M = np.zeros((self.p, self.p))
        for a, b in self.interactions:
            M[a - 1, b - 1] = 1.0 if values is None else values[(a, b)]
        return M


def _rates(probs, true_idx, threshold):
    probs = np.asarray(probs, dtype=float)
    truth = np.zeros(probs.shape, dtype=bool)
    for idx in true_idx:
        truth[idx] = True
    hit = probs >= threshold
    tp = float(np.mean(hit[truth])) if truth.any() else None
    null = ~truth
    tn = float(np.mean(~hit[null])) if null.any() else None
    return tp, tn


def tp_tn_rates(estimated, truth, inclusion_threshold=0.5):
    """True-positive and true-negative rates per component.

    Parameters
    ----------
    estimated : dict
        ``"main"`` and ``"nonlinear"``: length-p inclusion probabilities;
        ``"interaction"``: p x p matrix whose upper triangle holds pair
        inclusion probabilities.  Missing keys are skipped.
    truth : SelectionTruth
    inclusion_threshold : float

    Returns
    -------
    dict
        component -> ``(tp, tn)``; a rate is ``None`` when its reference
        set is empty.
    """
    if not 0 < inclusion_threshold < 1:
        raise ValueError("inclusion_threshold must lie in (0, 1)")
    out = {}
    if "main" in estimated:
        out["main"] = _rates(estimated["main"], [j - 1 for j in truth.main],
                             inclusion_threshold)
    if "nonlinear" in estimated:
        out["nonlinear"] = _rates(estimated["nonlinear"],
                                  [j - 1 for j in truth.nonlinear], inclusion_threshold)
    if "interaction" in estimated:
        M = np.asarray(estimated["interaction"], dtype=float)
        iu = np.triu_indices(truth.p, 1)
        pos = {(a, b): i for i, (a, b) in enumerate(zip(*iu))}
        true_idx = [pos[(a - 1, b - 1)] for a, b in truth.interactions]
        out["interaction"] = _rates(M[iu], true_idx, inclusion_threshold)
    return out


def autocorrelation(x):
    """Sample autocorrelations at all lags (biased estimator, via FFT)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    xc = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n] / n
    if acov[0] <= 0:
        return np.zeros(n)
    return acov / acov[0]


def ess(chain, return_degenerate=False):
    """Effective sample size with Geyer's initial positive sequence.

    ``N / (1 + 2 sum rho_t)`` with the autocorrelations summed in adjacent
    pairs until the first non-positive pair; capped at ``N``.  A constant
    chain returns ``N`` and, when requested, a degeneracy flag.
    """
    x = np.asarray(chain, dtype=float).ravel()
    n = x.size
    if n < 10:
        raise ValueError("ess needs a chain of length >= 10")
    if not np.all(np.isfinite(x)):
        raise ValueError("chain contains non-finite values")
    degenerate = bool(np.ptp(x) == 0)
    if degenerate:
        return (float(n), True) if return_degenerate else float(n)
    rho = autocorrelation(x)
    total = 0.0
    for t in range(0, n - 1, 2):
        pair = rho[t] + rho[t + 1]
        if pair <= 0:
            break
        total += pair
    tau = max(2.0 * total - 1.0, 1.0)
    val = min(n / tau, float(n))
    return (val, False) if return_degenerate else val


def spectral_variance(x, lags=GEWEKE_LAGS):
    """Spectral density at frequency zero from a Bartlett window over ``lags``."""
    x = np.asarray(x, dtype=float)
    n = x.size
    mean = math.fsum(x) / n
    xc = x - mean
    s = float(xc @ xc) / n
    for lag in range(1, min(lags, n - 1) + 1):
        w = 1.0 - lag / (lags + 1.0)
        s += 2.0 * w * float(xc[lag:] @ xc[:-lag]) / n
    return max(s, 0.0)


class GewekeResult(NamedTuple):
    z: float
    pvalue: float


def geweke(chain, frac_a=0.25, frac_b=0.25, return_degenerate=False):
    """Geweke comparison of the means of the first and last chain segments.

    Returns
    -------
    GewekeResult
        ``(z, pvalue)`` with a two-sided p-value; with ``return_degenerate``
        a third element flags zero estimated variance.
    """
    x = np.asarray(chain, dtype=float).ravel()
    n = x.size
    if n < 100:
        raise ValueError("geweke needs a chain of length >= 100")
    if not (0 < frac_a < 1 and 0 < frac_b < 1 and frac_a + frac_b <= 1):
        raise ValueError("segment fractions must be positive and sum to at most 1")
    na, nb = int(frac_a * n), int(frac_b * n)
    a, b = x[:na], x[n - nb:]
    diff = math.fsum(a) / na - math.fsum(b) / nb
    var = spectral_variance(a) / na + spectral_variance(b) / nb
    degenerate = not var > 0
    if degenerate:
        z = 0.0 if diff == 0 else math.copysign(math.inf, diff)
    else:
        z = diff / math.sqrt(var)
    p = float(2.0 * ndtr(-abs(z)))
    res = GewekeResult(float(z), p)
    return (res, degenerate) if return_degenerate else res


def interval_coverage(samples, holdout, alphas=(0.05,)):
    """Fraction of holdout responses inside each central predictive interval.

    Returns
    -------
    dict
        alpha -> coverage.
    """
    if holdout.n == 0:
        raise ValueError("holdout is empty")
    means, var = mean_draws(samples, holdout.X, holdout.Z, with_variance=True)
    sds = np.sqrt(var)
    out = {}
    for a in alphas:
        if not 0 <= a <= 1:
            raise ValueError("alpha must lie in [0, 1]")
        if a >= 1:
            out[a] = 0.0
            continue
        if a <= 0:
            out[a] = 1.0
            continue
        lo, hi = mixture_quantiles(means, sds, [a / 2, 1 - a / 2])
        out[a] = float(np.mean((holdout.y >= lo) & (holdout.y <= hi)))
    return out


@dataclass
class CurveTable:
    exposure: str
    grid: np.ndarray
    median: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["grid", "median", "lower95", "upper95"])
            for row in zip(self.grid, self.median, self.lower, self.upper):
                w.writerow([f"{v:.17g}" for v in row])


def dose_response_curve(samples, data, exposure, grid=50):
    """Posterior exposure-response curve with other inputs at their medians.

    Parameters
    ----------
    samples : PosteriorSamples
    data : Dataset
        Supplies the observed range of the exposure and the medians.
    exposure : int
        0-based exposure column.
    grid : int
        Number of equally spaced points over ``[min, max]``.

    Returns
    -------
    CurveTable
        Median and 95% band of the mean function over draws.
    """
    if not 0 <= exposure < samples.p:
        raise IndexError(f"exposure index {exposure} out of range")
    if grid < 2:
        raise ValueError("grid needs at least 2 points")
    obs = ~data.unobserved
    col = data.X[obs[:, exposure], exposure]
    g = np.linspace(col.min(), col.max(), grid)
    X_med = np.nanmedian(np.where(obs[:, : data.p], data.X, np.nan), axis=0)
    Z_med = (np.nanmedian(np.where(obs[:, data.p:], data.Z, np.nan), axis=0)
             if data.q else np.zeros(0))
    X_new = np.tile(X_med, (grid, 1))
    X_new[:, exposure] = g
    Z_new = np.tile(Z_med, (grid, 1))
    draws = mean_draws(samples, X_new, Z_new)
    lo, med, hi = np.quantile(draws, [0.025, 0.5, 0.975], axis=0)
    return CurveTable(samples.x_names[exposure], g, med, lo, hi)


@dataclass
class DiagnosticsReport:
    """Per-parameter ESS and Geweke statistics plus predictive coverage."""

    ess: dict = field(default_factory=dict)
    geweke_z: dict = field(default_factory=dict)
    geweke_p: dict = field(default_factory=dict)
    degenerate: dict = field(default_factory=dict)
    coverage: dict = field(default_factory=dict)

    def rows(self):
        for name in self.ess:
            yield [name, self.ess[name], self.geweke_z.get(name, math.nan),
                   self.geweke_p.get(name, math.nan), int(self.degenerate.get(name, False))]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["parameter", "ess", "geweke_z", "geweke_p", "degenerate"])
            for name, e, z, p, dg in self.rows():
                w.writerow([name, f"{e:.17g}", f"{z:.17g}", f"{p:.17g}", dg])

    def write_coverage_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["alpha", "nominal", "coverage"])
            for a, c in self.coverage.items():
                w.writerow([f"{a:.17g}", f"{1 - a:.17g}", f"{c:.17g}"])

    def summary(self):
        lines = []
        if self.ess:
            vals = np.array(list(self.ess.values()))
            lines.append(f"parameters: {len(vals)}")
            lines.append(f"ESS mean {vals.mean():.1f}, min {vals.min():.1f}")
            zs = np.array([z for z in self.geweke_z.values() if np.isfinite(z)])
            if zs.size:
                lines.append(f"Geweke |z| > 2: {int(np.sum(np.abs(zs) > 2))} of {zs.size}")
        for a, c in self.coverage.items():
            lines.append(f"coverage of {100 * (1 - a):.0f}% intervals: {c:.3f}")
        return "\n".join(lines)


def diagnose(samples, holdout=None, alphas=(0.05, 0.5)):
    """ESS and Geweke per tracked parameter; coverage when a holdout is given.

    Parameters whose draws never vary (for example an excluded coefficient)
    are reported as degenerate.
    """
    report = DiagnosticsReport()
    series = {}
    for j, name in enumerate(samples.x_names):
        series[f"beta[{name}]"] = samples.beta[:, j]
    for j, name in enumerate(samples.z_names):
        series[f"alpha[{name}]"] = samples.alpha[:, j]
    for name in ("sigma2", "tau_star"):
        series[name] = samples.scalars[name]
    for name, x in series.items():
        if x.size < 10:
            continue
        e, dg = ess(x, return_degenerate=True)
        report.ess[name] = e
        report.degenerate[name] = dg
        if x.size >= 100:
            res = geweke(x)
            report.geweke_z[name], report.geweke_p[name] = res
    if holdout is not None:
        report.coverage = interval_coverage(samples, holdout, alphas)
    return report
