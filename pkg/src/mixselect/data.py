"""Tabular data handling: CSV ingestion, log10 / standardization transforms,
missing and below-LOD bookkeeping, and train/test splitting.

Columns are split into exposures ``X`` (n x p) and covariates ``Z`` (n x q).
The masks ``missing_mask`` and ``censored_mask`` cover the stacked matrix
``[X | Z]`` so column ``j < p`` is exposure ``j`` and column ``p + l`` is
covariate ``l``.  Unobserved cells (missing or below the detection limit)
hold NaN; the two states never overlap.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

log = logging.getLogger(__name__)

MISSING_TOKENS = frozenset({"", "NA", "na", "NaN", "nan"})
CENSORED_TOKENS = frozenset({"<LOD", "<lod", "BLOD"})
INTERCEPT = "(Intercept)"


class DataError(ValueError):
    """Invalid or inconsistent input data."""


class ParseError(DataError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NonNumericValueError(ParseError):
    def __init__(self, value, column, line):
        self.value = value
        self.column = column
        super().__init__(f"non-numeric value {value!r} in column {column!r}", line)


@dataclass(frozen=True)
class TransformSpec:
    """Which transforms to apply when preparing a dataset.

    ``log10_columns`` may name exposures, covariates or the response.
    """

    log10_columns: frozenset = frozenset()
    standardize: bool = True
    center_response: bool = False

    def __post_init__(self):
        object.__setattr__(self, "log10_columns", frozenset(self.log10_columns))


@dataclass
class Dataset:
    y: np.ndarray
    X: np.ndarray
    Z: np.ndarray
    missing_mask: np.ndarray
    censored_mask: np.ndarray
    lod: np.ndarray
    x_names: list
    z_names: list
    response_name: str = "y"
    # column name -> (mean, sd) of the standardization that was applied
    scales: dict = field(default_factory=dict)
    log10_applied: frozenset = frozenset()
    response_shift: float = 0.0

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        n = self.y.shape[0]
        if self.X.shape[0] != n and self.X.size == 0:
            self.X = np.zeros((n, 0))
        self.Z = np.zeros((n, 0)) if self.Z is None else np.asarray(self.Z, dtype=float)
        if self.Z.size == 0:
            self.Z = np.zeros((n, 0))
        if self.X.shape[0] != n or self.Z.shape[0] != n:
            raise DataError(
                f"row counts differ: y={n}, X={self.X.shape[0]}, Z={self.Z.shape[0]}"
            )
        d = self.p + self.q
        if self.missing_mask is None:
            self.missing_mask = np.zeros((n, d), dtype=bool)
        if self.censored_mask is None:
            self.censored_mask = np.zeros((n, d), dtype=bool)
        if self.lod is None:
            self.lod = np.full(d, np.inf)
        self.missing_mask = np.asarray(self.missing_mask, dtype=bool)
        self.censored_mask = np.asarray(self.censored_mask, dtype=bool)
        self.lod = np.asarray(self.lod, dtype=float)
        if self.missing_mask.shape != (n, d) or self.censored_mask.shape != (n, d):
            raise DataError("mask shape must be (n, p + q)")
        if self.lod.shape != (d,):
            raise DataError("lod must have one entry per column of [X | Z]")
        if self.x_names is None:
            self.x_names = [f"x{j + 1}" for j in range(self.p)]
        if self.z_names is None:
            self.z_names = [f"z{j + 1}" for j in range(self.q)]
        self.x_names = list(self.x_names)
        self.z_names = list(self.z_names)

    @property
    def n(self):
        return self.y.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def q(self):
        return self.Z.shape[1]

    @property
    def column_names(self):
        return self.x_names + self.z_names

    @property
    def W(self):
        """Stacked ``[X | Z]`` matrix (a copy)."""
        return np.hstack([self.X, self.Z])

    @property
    def unobserved(self):
        return self.missing_mask | self.censored_mask

    @property
    def is_complete(self):
        return not self.unobserved.any()

    def with_W(self, W):
        """Return a copy with ``[X | Z]`` replaced by ``W`` (masks kept)."""
        W = np.asarray(W, dtype=float)
        return replace(self, X=W[:, : self.p].copy(), Z=W[:, self.p :].copy())

    def subset(self, rows):
        rows = np.asarray(rows)
        return replace(
            self,
            y=self.y[rows].copy(),
            X=self.X[rows].copy(),
            Z=self.Z[rows].copy(),
            missing_mask=self.missing_mask[rows].copy(),
            censored_mask=self.censored_mask[rows].copy(),
        )

    def copy(self):
        return self.subset(np.arange(self.n))


def from_arrays(y, X, Z=None, *, x_names=None, z_names=None, response_name="y"):
    """Build a complete-data Dataset from arrays; NaN cells are flagged missing."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if X.shape[0] != y.shape[0] and X.shape[1] == y.shape[0]:
        X = X.T
    Z = np.zeros((y.shape[0], 0)) if Z is None else np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    if X.shape[0] != y.shape[0] or Z.shape[0] != y.shape[0]:
        raise DataError(
            f"row counts differ: y={y.shape[0]}, X={X.shape[0]}, Z={Z.shape[0]}"
        )
    W = np.hstack([X, Z])
    return Dataset(
        y=y,
        X=X,
        Z=Z,
        missing_mask=np.isnan(W),
        censored_mask=np.zeros(W.shape, dtype=bool),
        lod=np.full(W.shape[1], np.inf),
        x_names=x_names,
        z_names=z_names,
        response_name=response_name,
    )


def read_lod_file(path):
    """Read ``name,LOD`` pairs (raw scale).  A header row is optional."""
    lods = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for i, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ParseError(f"expected 2 fields, got {len(row)}", i)
            name, value = row[0].strip(), row[1].strip()
            try:
                lods[name] = float(value)
            except ValueError:
                if i == 1:
                    continue  # header
                raise NonNumericValueError(value, "LOD", i) from None
    return lods


def load_csv(
    path,
    schema=None,
    *,
    response,
    covariates=(),
    exposures=None,
    lod=None,
    add_intercept=False,
    require_response=True,
):
    """Read a CSV file into a Dataset.

    Parameters
    ----------
    path : str or path-like
        UTF-8 CSV with a header row.  Empty cells and ``NA`` are missing;
        ``<LOD`` marks a value censored below the detection limit.
    schema : TransformSpec, optional
        Transforms applied after reading (log10, then standardization, then
        optional response centering).  ``None`` returns the raw values.
    response : str
        Name of the response column.
    covariates : sequence of str
        Covariate column names; every remaining column (or ``exposures``
        when given) is treated as an exposure.
    lod : dict or path-like, optional
        Per-column detection limits on the raw scale.  Observed values
        strictly below their LOD are stored as censored.
    add_intercept : bool
        Append a constant covariate column.
    require_response : bool
        When False a file without the response column is accepted (for
        prediction); ``y`` is then all NaN.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty file", 1) from None
        rows = []
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"expected {len(header)} fields, got {len(row)}", reader.line_num
                )
            rows.append((reader.line_num, [c.strip() for c in row]))

    if len(set(header)) != len(header):
        raise ParseError("duplicate column names in header", 1)
    has_response = response in header
    if not has_response and require_response:
        raise DataError(f"response column {response!r} not found")
    covariates = list(covariates)
    for c in covariates:
        if c not in header:
            raise DataError(f"covariate column {c!r} not found")
    if exposures is None:
        exposures = [h for h in header if h != response and h not in covariates]
    else:
        exposures = list(exposures)
        for c in exposures:
            if c not in header:
                raise DataError(f"exposure column {c!r} not found")
    if isinstance(lod, (str, bytes)) or hasattr(lod, "__fspath__"):
        lod = read_lod_file(lod)
    lod = dict(lod or {})
    for name in lod:
        if name not in exposures and name not in covariates:
            raise DataError(f"LOD given for unknown column {name!r}")

    cols = exposures + covariates
    index = {h: i for i, h in enumerate(header)}
    n, d = len(rows), len(cols)
    y = np.empty(n)
    W = np.full((n, d), np.nan)
    missing = np.zeros((n, d), dtype=bool)
    censored = np.zeros((n, d), dtype=bool)
    y_missing = np.zeros(n, dtype=bool)
    lod_vec = np.array([lod.get(c, np.inf) for c in cols], dtype=float)

    for i, (line, row) in enumerate(rows):
        cell = row[index[response]] if has_response else ""
        if not has_response:
            y[i] = np.nan
        elif cell in MISSING_TOKENS:
            y_missing[i] = True
            y[i] = np.nan
        else:
            y[i] = _to_float(cell, response, line)
        for j, c in enumerate(cols):
            cell = row[index[c]]
            if cell in MISSING_TOKENS:
                missing[i, j] = True
            elif cell in CENSORED_TOKENS:
                if not np.isfinite(lod_vec[j]):
                    raise ParseError(f"censored cell in column {c!r} without an LOD", line)
                censored[i, j] = True
            else:
                v = _to_float(cell, c, line)
                if np.isfinite(lod_vec[j]) and v < lod_vec[j]:
                    censored[i, j] = True
                else:
                    W[i, j] = v

    if y_missing.any():
        log.warning("dropping %d row(s) with a missing response", int(y_missing.sum()))
        keep = ~y_missing
        y, W, missing, censored = y[keep], W[keep], missing[keep], censored[keep]

    p = len(exposures)
    Z = W[:, p:]
    z_names = list(covariates)
    zmask = missing[:, p:], censored[:, p:]
    if add_intercept:
        Z = np.hstack([Z, np.ones((Z.shape[0], 1))])
        z_names.append(INTERCEPT)
        zmask = (
            np.hstack([zmask[0], np.zeros((Z.shape[0], 1), dtype=bool)]),
            np.hstack([zmask[1], np.zeros((Z.shape[0], 1), dtype=bool)]),
        )
        lod_vec = np.append(lod_vec, np.inf)
    data = Dataset(
        y=y,
        X=W[:, :p],
        Z=Z,
        missing_mask=np.hstack([missing[:, :p], zmask[0]]),
        censored_mask=np.hstack([censored[:, :p], zmask[1]]),
        lod=lod_vec,
        x_names=exposures,
        z_names=z_names,
        response_name=response,
    )
    if schema is not None:
        data = apply_transforms(data, schema)
    return data


def _to_float(cell, column, line):
    try:
        v = float(cell)
    except ValueError:
        raise NonNumericValueError(cell, column, line) from None
    if not math.isfinite(v):
        raise NonNumericValueError(cell, column, line)
    return v


def apply_transforms(d, schema):
    d = log10_transform(d, schema)
    if schema.standardize:
        d = standardize(d)
    if schema.center_response:
        d = center_response(d)
    return d


def log10_transform(d, spec):
    """Replace the selected columns (and their LODs) by base-10 logarithms."""
    names = set(spec.log10_columns)
    unknown = names - set(d.column_names) - {d.response_name}
    if unknown:
        raise DataError(f"log10 requested for unknown columns {sorted(unknown)}")
    W = d.W
    lod = d.lod.copy()
    observed = ~d.unobserved
    for j, name in enumerate(d.column_names):
        if name not in names:
            continue
        col = W[:, j]
        bad = observed[:, j] & ~(col > 0)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise DataError(
                f"log10 of nonpositive value {col[i]!r} at row {i}, column {name!r}"
            )
        W[observed[:, j], j] = np.log10(col[observed[:, j]])
        if np.isfinite(lod[j]):
            if lod[j] <= 0:
                raise DataError(f"nonpositive LOD for column {name!r}")
            lod[j] = math.log10(lod[j])
    y = d.y
    if d.response_name in names:
        if np.any(y <= 0):
            i = int(np.flatnonzero(y <= 0)[0])
            raise DataError(f"log10 of nonpositive response at row {i}")
        y = np.log10(y)
    out = d.with_W(W)
    out.y = y
    out.lod = lod
    out.log10_applied = d.log10_applied | frozenset(names)
    return out


def _is_indicator(col):
    vals = np.unique(col)
    return vals.size <= 2 and np.all(np.isin(vals, (0.0, 1.0)))


def standardize(d):
    """Center and scale every continuous column by its observed mean and sample sd.

    Indicator (0/1) and constant-intercept columns are left untouched.
    Statistics use observed entries only and are stored in ``scales`` (the
    running composition, so repeated calls still invert to the raw values).
    """
    W = d.W
    lod = d.lod.copy()
    observed = ~d.unobserved
    scales = dict(d.scales)
    for j, name in enumerate(d.column_names):
        col = W[observed[:, j], j]
        if name == INTERCEPT or (col.size and _is_indicator(col)):
            continue
        if col.size < 2:
            raise DataError(f"column {name!r} has fewer than 2 observed values")
        mean = col.mean()
        sd = col.std(ddof=1)
        if not sd > 0:
            raise DataError(f"column {name!r} has zero variance")
        W[observed[:, j], j] = (col - mean) / sd
        lod[j] = (lod[j] - mean) / sd
        m0, s0 = scales.get(name, (0.0, 1.0))
        scales[name] = (m0 + s0 * mean, s0 * sd)
    out = d.with_W(W)
    out.lod = lod
    out.scales = scales
    return out


def center_response(d):
    out = d.copy()
    shift = float(d.y.mean())
    out.y = d.y - shift
    out.response_shift = d.response_shift + shift
    return out


def unstandardize(d):
    """Map standardized columns (and LODs) back through the stored statistics."""
    W = d.W
    lod = d.lod.copy()
    for j, name in enumerate(d.column_names):
        if name in d.scales:
            mean, sd = d.scales[name]
            W[:, j] = W[:, j] * sd + mean
            lod[j] = lod[j] * sd + mean
    out = d.with_W(W)
    out.lod = lod
    out.scales = {}
    return out


def transform_like(d, reference):
    """Apply ``reference``'s log10 and standardization to new data ``d``."""
    W = d.W
    names = d.column_names
    if names != reference.column_names:
        raise DataError("columns of new data do not match the training data")
    lod = d.lod.copy()
    for j, name in enumerate(names):
        if name in reference.log10_applied:
            obs = ~np.isnan(W[:, j])
            if np.any(W[obs, j] <= 0):
                raise DataError(f"log10 of nonpositive value in column {name!r}")
            W[obs, j] = np.log10(W[obs, j])
            if np.isfinite(lod[j]):
                lod[j] = math.log10(lod[j])
        if name in reference.scales:
            mean, sd = reference.scales[name]
            W[:, j] = (W[:, j] - mean) / sd
            lod[j] = (lod[j] - mean) / sd
    out = d.with_W(W)
    out.lod = lod
    y = d.y
    if reference.response_name in reference.log10_applied:
        y = np.log10(y)
    out.y = y - reference.response_shift
    out.scales = dict(reference.scales)
    out.log10_applied = reference.log10_applied
    out.response_shift = reference.response_shift
    return out


def add_intercept(d):
    if INTERCEPT in d.z_names:
        return d
    n = d.n
    pad = np.zeros((n, 1), dtype=bool)
    return replace(
        d,
        Z=np.hstack([d.Z, np.ones((n, 1))]),
        z_names=d.z_names + [INTERCEPT],
        missing_mask=np.hstack([d.missing_mask, pad]),
        censored_mask=np.hstack([d.censored_mask, pad]),
        lod=np.append(d.lod, np.inf),
    )


def train_test_split(d, n_test, seed):
    """Random disjoint row split; returns ``(train, test)``.

    Test rows are drawn from the complete rows only, so that the test set
    can be scored without imputation.
    """
    if not 0 < n_test < d.n:
        raise DataError(f"n_test must be in (0, {d.n}), got {n_test}")
    complete = np.flatnonzero(~d.unobserved.any(axis=1))
    if complete.size < n_test:
        raise DataError(f"only {complete.size} complete rows for a test set of {n_test}")
    pick = np.random.default_rng(seed).permutation(complete)[:n_test]
    test_rows = np.sort(pick)
    train_rows = np.setdiff1d(np.arange(d.n), test_rows)
    return d.subset(train_rows), d.subset(test_rows)
