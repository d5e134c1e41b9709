"""Latent factor imputation of missing and below-LOD predictor values.

The exposures and continuous covariates ``W`` (n x d, centered once with
observed-entry means) follow

    W_i = Lambda eta_i + e_i,   eta_i ~ N(0, I_k),   e_i ~ N(0, diag(s2)),

with elementwise N(0, 1) loadings and InverseGamma(1/2, 1/2) residual
variances.  Missing cells are drawn from their normal conditional and
censored cells from the same normal truncated above at the column's LOD.
Only the predictor model enters these updates (cut of feedback), so the
imputations never depend on the response.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import ndtr, ndtri

from .data import INTERCEPT, DataError, _is_indicator

log = logging.getLogger(__name__)

# below this standardized bound the inverse-CDF draw loses accuracy
TAIL_SWITCH = -5.0


@dataclass
class FactorModelState:
    """Current factor-model parameters.

    Attributes
    ----------
    loadings : (d, k) ndarray
    eta : (n, k) ndarray
        Latent factor scores.
    resid_var : (d,) ndarray
        Diagonal residual variances, all positive.
    k : int
    center : (d,) ndarray
        Column means removed before fitting (fixed for the whole run).
    """

    loadings: np.ndarray
    eta: np.ndarray
    resid_var: np.ndarray
    k: int
    center: np.ndarray

    def __post_init__(self):
        if self.loadings.shape[1] != self.k or self.eta.shape[1] != self.k:
            raise ValueError("loadings and eta must have k columns")
        if self.k > self.loadings.shape[0]:
            raise ValueError("k cannot exceed the number of columns d")
        if np.any(self.resid_var <= 0):
            raise ValueError("residual variances must be positive")

    @property
    def d(self):
        return self.loadings.shape[0]

    def fitted(self):
        """``eta Lambda^T`` on the centered scale."""
        return self.eta @ self.loadings.T

    def copy(self):
        return FactorModelState(
            self.loadings.copy(), self.eta.copy(), self.resid_var.copy(),
            self.k, self.center.copy(),
        )


def choose_k(corr, threshold=0.85):
    """Smallest number of factors whose eigenvalues explain ``threshold`` of ``d``.

    Parameters
    ----------
    corr : (d, d) array_like
        Correlation matrix.
    threshold : float
        Fraction of total variability in (0, 1].

    Returns
    -------
    int
    """
    corr = np.asarray(corr, dtype=float)
    if corr.ndim != 2 or corr.shape[0] != corr.shape[1]:
        raise ValueError("corr must be square")
    if not 0 < threshold <= 1:
        raise ValueError("threshold must lie in (0, 1]")
    d = corr.shape[0]
    if d == 0:
        return 0
    ev = np.sort(np.linalg.eigvalsh(0.5 * (corr + corr.T)))[::-1]
    ev = np.clip(ev, 0.0, None)
    cum = np.cumsum(ev)
    # tolerance so that exact ties such as 4/5 vs 0.8 are not lost to rounding
    k = int(np.searchsorted(cum, threshold * d * (1 - 1e-12))) + 1
    return min(k, d)


def pairwise_corr(W, observed):
    """Correlation from pairwise-complete observations, repaired to be PSD."""
    d = W.shape[1]
    C = np.eye(d)
    for a in range(d):
        for b in range(a + 1, d):
            ok = observed[:, a] & observed[:, b]
            if ok.sum() < 3:
                continue
            x, y = W[ok, a], W[ok, b]
            sx, sy = x.std(), y.std()
            if sx > 0 and sy > 0:
                C[a, b] = C[b, a] = np.mean((x - x.mean()) * (y - y.mean())) / (sx * sy)
    w, V = np.linalg.eigh(C)
    if w.min() < 0:
        C = (V * np.clip(w, 0, None)) @ V.T
        s = np.sqrt(np.diag(C))
        s[s == 0] = 1.0
        C = C / np.outer(s, s)
    return C


def _row_groups(mask):
    """Group rows by their mask pattern: yields (pattern, row indices)."""
    if mask.shape[0] == 0:
        return
    patterns, inverse = np.unique(mask, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    order = np.argsort(inverse, kind="stable")
    bounds = np.searchsorted(inverse[order], np.arange(len(patterns) + 1))
    for g, pat in enumerate(patterns):
        yield pat, order[bounds[g] : bounds[g + 1]]


def factor_gibbs_step(fs, W, use, rng):
    """One conjugate sweep over factors, loadings and residual variances.

    Parameters
    ----------
    fs : FactorModelState
    W : (n, d) ndarray
        Centered matrix; entries where ``use`` is False are ignored.
    use : (n, d) bool ndarray
        Entries that enter the likelihood (observed values and the current
        draws of censored values).  Excluded entries are marginalized out,
        which is exact under the diagonal residual covariance.
    rng : numpy.random.Generator

    Returns
    -------
    FactorModelState
        A new state.
    """
    n, d = W.shape
    k = fs.k
    L, s2 = fs.loadings, fs.resid_var
    eta = np.zeros((n, k))
    Wz = np.where(use, W, 0.0)
    if k > 0:
        noise = rng.standard_normal((n, k))
        for pat, rows in _row_groups(use):
            Lo = L[pat] / s2[pat, None] ** 0.5
            prec = np.eye(k) + Lo.T @ Lo
            cf = cho_factor(prec, lower=True)
            rhs = (Wz[np.ix_(rows, pat)] / s2[pat]) @ L[pat]
            mean = cho_solve(cf, rhs.T).T
            # eta = mean + R^{-T} z with prec = R R^T
            Lc = np.tril(cf[0])
            eta[rows] = mean + np.linalg.solve(Lc.T, noise[rows].T).T
    loadings = np.zeros((d, k))
    resid = np.empty(d)
    noise = rng.standard_normal((d, k))
    for j in range(d):
        rows = use[:, j]
        E = eta[rows]
        w = W[rows, j]
        if k > 0:
            prec = np.eye(k) + E.T @ E / s2[j]
            cf = cho_factor(prec, lower=True)
            mean = cho_solve(cf, E.T @ w / s2[j])
            loadings[j] = mean + np.linalg.solve(np.tril(cf[0]).T, noise[j])
        r = w - E @ loadings[j]
        shape = 0.5 + 0.5 * rows.sum()
        rate = 0.5 + 0.5 * float(r @ r)
        resid[j] = rate / rng.gamma(shape)
    return FactorModelState(loadings, eta, resid, k, fs.center)


def factor_loglik(fs, W, use):
    """Log-likelihood of the used entries given factors and loadings."""
    r = np.where(use, W - fs.fitted(), 0.0)
    ll = -0.5 * (r**2 / fs.resid_var).sum()
    ll -= 0.5 * (use * np.log(2 * np.pi * fs.resid_var)).sum()
    return float(ll)


def impute_missing(fs, W, missing, rng):
    """Draw every missing cell from ``N(eta_i^T lambda_j, s2_j)``.

    ``W`` is centered; a completed copy is returned.
    """
    W = np.array(W, dtype=float)
    i, j = np.nonzero(missing)
    if i.size:
        mu = np.einsum("ik,ik->i", fs.eta[i], fs.loadings[j])
        W[i, j] = mu + np.sqrt(fs.resid_var[j]) * rng.standard_normal(i.size)
    return W


def truncnorm_upper(mu, sd, upper, rng):
    """Draws from ``N(mu, sd^2)`` truncated to ``(-inf, upper]``.

    Inverse-CDF sampling for standardized bounds above ``TAIL_SWITCH`` and
    exponential rejection (Robert, 1995) in the far tail.  Results are
    clipped to the bound so the support constraint holds exactly.
    """
    mu, sd, upper = np.broadcast_arrays(
        np.asarray(mu, float), np.asarray(sd, float), np.asarray(upper, float)
    )
    b = (upper - mu) / sd
    z = np.empty(b.shape)
    body = b >= TAIL_SWITCH
    u = rng.random(b.shape)
    if body.any():
        z[body] = ndtri(u[body] * ndtr(b[body]))
    tail = ~body
    if tail.any():
        # -z follows a standard normal truncated below at a = -b > 5
        a = -b[tail]
        alpha = 0.5 * (a + np.sqrt(a * a + 4.0))
        out = np.empty(a.shape)
        todo = np.arange(a.size)
        while todo.size:
            x = a[todo] + rng.exponential(size=todo.size) / alpha[todo]
            ok = rng.random(todo.size) <= np.exp(-0.5 * (x - alpha[todo]) ** 2)
            out[todo[ok]] = x[ok]
            todo = todo[~ok]
        z[tail] = -out
    z = np.minimum(z, b)
    return np.minimum(mu + sd * z, upper)


def impute_below_lod(fs, W, lod, censored, rng):
    """Draw every censored cell from its normal truncated above at the LOD.

    ``lod`` is on the same (centered) scale as ``W``.
    """
    W = np.array(W, dtype=float)
    i, j = np.nonzero(censored)
    if i.size:
        if not np.all(np.isfinite(lod[j]) | np.isinf(lod[j])):
            raise ValueError("LOD must be a number or +inf for censored columns")
        mu = np.einsum("ik,ik->i", fs.eta[i], fs.loadings[j])
        W[i, j] = truncnorm_upper(mu, np.sqrt(fs.resid_var[j]), lod[j], rng)
    return W


def cut_feedback_sweep(fs, Wc, missing, censored, lod, rng):
    """Factor update followed by both imputations on the centered scale.

    The response is not an argument: the imputations are a function of the
    predictor model alone.

    Returns
    -------
    (FactorModelState, ndarray)
    """
    use = ~missing
    fs = factor_gibbs_step(fs, Wc, use, rng)
    ll = factor_loglik(fs, Wc, use)
    if not np.isfinite(ll):
        raise FloatingPointError("factor-model log-likelihood is not finite")
    Wc = impute_missing(fs, Wc, missing, rng)
    Wc = impute_below_lod(fs, Wc, lod, censored, rng)
    return fs, Wc


class FactorImputer:
    """Imputation component attached to ``run_chain``.

    Parameters
    ----------
    k : int, optional
        Number of factors; default from :func:`choose_k` on the
        pairwise-complete correlations.
    threshold : float
        Variability fraction for :func:`choose_k`.
    keep_history : bool
        Record the imputed cells after every sweep (``history``).
    """

    def __init__(self, k=None, threshold=0.85, keep_history=False):
        self.k = k
        self.threshold = threshold
        self.keep_history = keep_history
        self.history = []
        self.state = None
        self.columns = None

    def select_columns(self, data):
        """Exposures plus continuous covariates; indicators and intercept excluded."""
        W, obs = data.W, ~data.unobserved
        cols = []
        for j, name in enumerate(data.column_names):
            col = W[obs[:, j], j]
            excluded = name == INTERCEPT or (col.size > 0 and _is_indicator(col))
            if j < data.p or not excluded:
                cols.append(j)
            elif data.unobserved[:, j].any():
                raise DataError(f"column {name!r} has unobserved cells but is not continuous")
        return np.array(cols, dtype=int)

    def initialize(self, data, rng):
        """Center, pick ``k``, start the factor model and fill unobserved cells."""
        self.columns = cols = self.select_columns(data)
        self.history = []
        W = data.W[:, cols]
        missing = data.missing_mask[:, cols]
        censored = data.censored_mask[:, cols]
        observed = ~(missing | censored)
        if np.any(observed.sum(axis=0) < 2):
            raise DataError("every imputed column needs at least 2 observed values")
        center = np.array([W[observed[:, j], j].mean() for j in range(W.shape[1])])
        sd = np.array([W[observed[:, j], j].std() for j in range(W.shape[1])])
        sd[sd == 0] = 1.0
        Wc = W - center
        self.lod_c = data.lod[cols] - center
        # start: missing at the mean, censored half an sd below their bound
        Wc[missing] = 0.0
        ci, cj = np.nonzero(censored)
        Wc[ci, cj] = self.lod_c[cj] - 0.5 * sd[cj]
        corr = pairwise_corr(W, observed)
        k = self.k if self.k is not None else choose_k(corr, self.threshold)
        d = W.shape[1]
        k = int(min(max(k, 0), d))
        U, s, Vt = np.linalg.svd(Wc, full_matrices=False)
        n = Wc.shape[0]
        loadings = Vt[:k].T * s[:k] / np.sqrt(n)
        eta = U[:, :k] * np.sqrt(n)
        resid = np.maximum(np.var(Wc - eta @ loadings.T, axis=0), 0.1 * sd**2)
        self.state = FactorModelState(loadings, eta, resid, k, center)
        self._missing, self._censored = missing, censored
        log.debug("factor imputer: d=%d, k=%d", d, k)
        if not (missing.any() or censored.any()):
            return data
        return self.sweep(data.with_W(self._place(data, Wc)), rng)

    def _place(self, data, Wc):
        # only unobserved cells are written, so observed values stay bit-exact
        W = data.W
        sub = W[:, self.columns]
        fill = self._missing | self._censored
        sub[fill] = (Wc + self.state.center)[fill]
        W[:, self.columns] = sub
        return W

    def sweep(self, data, rng):
        """One cut-of-feedback sweep; returns ``data`` with completed cells."""
        if self.state is None:
            raise RuntimeError("initialize must be called before sweep")
        Wc = data.W[:, self.columns] - self.state.center
        self.state, Wc = cut_feedback_sweep(
            self.state, Wc, self._missing, self._censored, self.lod_c, rng
        )
        if self.keep_history:
            self.history.append(Wc[self._missing | self._censored] + np.broadcast_to(
                self.state.center, Wc.shape)[self._missing | self._censored])
        return data.with_W(self._place(data, Wc))
