"""Simulation scenarios and the replicated-experiment harness."""
from __future__ import annotations

import csv
import logging
import math
import os
import traceback
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import add_intercept, from_arrays
from .metrics import SelectionTruth, frobenius_distance, test_mse, tp_tn_rates
from .sampler.chain import run_chains
from .sampler.predict import mean_draws
from .sampler.state import PriorConfig

log = logging.getLogger(__name__)

SCENARIOS = ("a", "b", "c")
MIN_P = {"a": 5, "b": 4, "c": 3}

# true interaction coefficients, 1-based pairs
TRUE_LAMBDA = {
    "a": {(1, 2): 2.0, (1, 3): -1.0},
    "b": {(1, 2): 2.0, (1, 3): -1.0, (2, 3): -1.0, (3, 4): -2.0},
    "c": {},
}
TRUE_MAIN = {"a": (1, 2, 3), "b": (1, 2, 3, 4), "c": ()}
TRUE_NONLINEAR = {"a": (4, 5), "b": (), "c": (1, 3)}


@dataclass(frozen=True)
class ScenarioSpec:
    id: str
    n: int
    p: int
    noise_sd: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.id not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.id!r}; choose from {SCENARIOS}")
        if self.p < MIN_P[self.id]:
            raise ValueError(f"scenario {self.id} needs p >= {MIN_P[self.id]}")
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be nonnegative")


def mean_function(scenario, X):
    """Noise-free response surface of a scenario at the rows of ``X``."""
    x = np.asarray(X, dtype=float).T
    if scenario == "a":
        return (x[0] - x[1] + x[2] + 2 * x[0] * x[1] - x[0] * x[2]
                + 0.5 * x[3] ** 2 + 4.0 / (np.exp(-2 * x[4]) + 1.0))
    if scenario == "b":
        return (x[0] + x[1] - x[2] - x[3] + 2 * x[0] * x[1] - x[0] * x[2]
                - x[1] * x[2] - 2 * x[2] * x[3])
    if scenario == "c":
        return np.sin(x[0] + 3 * x[2]) - 0.5 * x[2] ** 2 + np.exp(-0.1 * x[0])
    raise ValueError(f"unknown scenario {scenario!r}")


def scenario_truth(spec):
    return SelectionTruth(
        p=spec.p,
        main=TRUE_MAIN[spec.id],
        interactions=tuple(TRUE_LAMBDA[spec.id]),
        nonlinear=TRUE_NONLINEAR[spec.id],
    )


def generate_scenario(spec, rng=None, n=None):
    """Draw ``X ~ N(0, I_p)`` and ``y`` from the scenario's surface.

    The returned Dataset carries an intercept column in ``Z``.

    Returns
    -------
    (Dataset, SelectionTruth)
    """
    rng = rng if rng is not None else np.random.default_rng(spec.seed)
    n = spec.n if n is None else n
    X = rng.standard_normal((n, spec.p))
    y = mean_function(spec.id, X) + spec.noise_sd * rng.standard_normal(n)
    data = add_intercept(from_arrays(y, X))
    return data, scenario_truth(spec)


@dataclass
class RunConfig:
    heredity: str = "strong"
    iterations: int = 2000
    burn_in: int = None
    m: int = None
    seed: int = 0
    out_dir: str = None
    holdout: int = 100
    chains: int = 1
    jobs: int = 1
    prior: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("iterations", "holdout", "chains", "jobs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.m is not None and self.m < 1:
            raise ValueError("m must be positive")
        if self.burn_in is not None and not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn_in must satisfy 0 <= burn_in < iterations")

    def prior_config(self):
        return PriorConfig.from_dict({"heredity": self.heredity, **self.prior})


REPLICATION_FIELDS = (
    "replication", "status", "test_mse", "frobenius",
    "tp_main", "tn_main", "tp_int", "tn_int", "tp_nonlinear", "tn_nonlinear",
    "prob_nonlinear", "oracle_mse",
)


def score(samples, truth, holdout, scenario):
    """Test MSE, Frobenius error and TP/TN rates of one fit."""
    pred = mean_draws(samples, holdout.X, holdout.Z).mean(axis=0)
    lam_hat = samples.interaction_mean()
    lam_true = truth.interaction_matrix({k: v for k, v in TRUE_LAMBDA[scenario].items()})
    rates = tp_tn_rates(
        {"main": samples.main_inclusion(),
         "interaction": samples.interaction_inclusion(),
         "nonlinear": samples.nonlinear_inclusion()},
        truth,
    )
    return {
        "test_mse": test_mse(holdout.y, pred),
        "frobenius": frobenius_distance(lam_hat, lam_true),
        "tp_main": rates["main"][0], "tn_main": rates["main"][1],
        "tp_int": rates["interaction"][0], "tn_int": rates["interaction"][1],
        "tp_nonlinear": rates["nonlinear"][0], "tn_nonlinear": rates["nonlinear"][1],
        "prob_nonlinear": samples.prob_nonlinear(),
        # error of the true surface on the same holdout, for reference
        "oracle_mse": test_mse(holdout.y, mean_function(scenario, holdout.X)),
    }


def replication_seeds(seed, replications):
    """(data seed, chain seed) per replication, spawned from one root seed."""
    out = []
    for child in np.random.SeedSequence(seed).spawn(replications):
        a, b = child.generate_state(2)
        out.append((int(a), int(b)))
    return out


def run_replication(config, spec, r, data_seed, chain_seed):
    rng = np.random.default_rng(data_seed)
    train, truth = generate_scenario(spec, rng)
    holdout, _ = generate_scenario(spec, rng, n=config.holdout)
    samples = run_chains(
        train, config.prior_config(), iterations=config.iterations,
        burn_in=config.burn_in, seed=chain_seed, m=config.m,
        chains=config.chains, jobs=1,
    )
    row = {"replication": r, "status": "ok"}
    row.update(score(samples, truth, holdout, spec.id))
    return row


def _safe_replication(args):
    config, spec, r, ds, cs = args
    try:
        return run_replication(config, spec, r, ds, cs)
    except Exception as exc:  # recorded, the experiment carries on
        log.error("replication %d failed: %s", r, exc)
        log.debug("%s", traceback.format_exc())
        row = {k: None for k in REPLICATION_FIELDS}
        row.update(replication=r, status=f"failed: {type(exc).__name__}: {exc}")
        return row


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % v


def summarize(rows):
    """Mean of every metric over successful replications (None if undefined)."""
    ok = [r for r in rows if r["status"] == "ok"]
    out = {"replications": len(rows), "failed": len(rows) - len(ok)}
    for name in REPLICATION_FIELDS[2:]:
        vals = [r[name] for r in ok if r[name] is not None]
        out[name] = float(np.mean(vals)) if vals else None
    return out


def write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(row.get(h)) for h in header])


def run_experiment(config, spec, replications=10):
    """Fit and score ``replications`` simulated datasets.

    Each replication draws its own training set and a ``config.holdout``-row
    test set from a seed spawned off ``config.seed``.  When
    ``config.out_dir`` is set, ``replications.csv`` and ``metrics.csv`` are
    written there.

    Returns
    -------
    (list of dict, dict)
        Per-replication rows and their averages.
    """
    if replications < 1:
        raise ValueError("replications must be positive")
    seeds = replication_seeds(config.seed, replications)
    args = [(config, spec, r, ds, cs) for r, (ds, cs) in enumerate(seeds)]
    if config.jobs > 1 and replications > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=min(config.jobs, replications)) as ex:
            rows = list(ex.map(_safe_replication, args))
    else:
        rows = [_safe_replication(a) for a in args]
    rows.sort(key=lambda r: r["replication"])
    summary = summarize(rows)
    if config.out_dir:
        os.makedirs(config.out_dir, exist_ok=True)
        write_rows(os.path.join(config.out_dir, "replications.csv"), REPLICATION_FIELDS, rows)
        write_rows(os.path.join(config.out_dir, "metrics.csv"), list(summary), [summary])
    return rows, summary


def read_metrics(path):
    with open(path, newline="") as fh:
        row = next(csv.DictReader(fh))
    return {k: (float(v) if v not in ("", None) else None) for k, v in row.items()}


def relative_to_best(results, metrics=("test_mse", "frobenius")):
    """Divide each method's metric by the best (lowest) value across methods.

    Parameters
    ----------
    results : dict
        method name -> metrics dict (for example from :func:`read_metrics`).

    Returns
    -------
    dict
        method name -> {metric: ratio}.
    """
    if len(results) < 2:
        raise ValueError("relative reporting needs results from at least two methods")
    out = {name: {} for name in results}
    for metric in metrics:
        vals = {name: r.get(metric) for name, r in results.items()}
        finite = [v for v in vals.values() if v is not None and math.isfinite(v)]
        best = min(finite) if finite else None
        for name, v in vals.items():
            if v is None or best is None:
                out[name][metric] = None
            elif best == 0:
                out[name][metric] = 1.0 if v == 0 else math.inf
            else:
                out[name][metric] = v / best
    return out


def config_dict(config):
    return asdict(config)
