"""Command-line interface: ``mixselect {fit,predict,simulate,diagnose}``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from dataclasses import asdict
from types import SimpleNamespace

import numpy as np

from . import backend
from .data import DataError, ParseError, TransformSpec, add_intercept, load_csv, \
    train_test_split, transform_like
from .harness import RunConfig, ScenarioSpec, read_metrics, relative_to_best, \
    run_experiment
from .imputation import FactorImputer
from .metrics import diagnose, dose_response_curve, interval_coverage, test_mse
from .samples_io import fmt, read_samples, write_samples, write_table
from .sampler.chain import SamplerError, pair_labels, run_chains
from .sampler.predict import predict
from .sampler.state import PriorConfig

log = logging.getLogger("mixselect")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

BOOL_TRUE = {"1", "true", "yes", "on"}
BOOL_FALSE = {"0", "false", "no", "off"}


def _names(s):
    return [c.strip() for c in s.split(",") if c.strip()] if s else []


def read_config(path):
    """Parse a ``key = value`` file (``#`` comments) into a dict of strings."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"expected key = value in config file {path}", lineno)
            key, value = (t.strip() for t in line.split("=", 1))
            out[key.lstrip("-").replace("-", "_")] = value
    return out


def _common(p, iters=2000):
    p.add_argument("--config", help="key = value file; command-line flags take precedence")
    p.add_argument("--heredity", choices=("strong", "weak"), default="strong")
    p.add_argument("--iters", type=int, default=iters, help="MCMC iterations")
    p.add_argument("--burnin", type=int, default=None,
                   help="burn-in iterations (default 80%% of --iters)")
    p.add_argument("--m", type=int, default=None,
                   help="low-rank kernel order (default min(n, 100))")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--chains", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mixselect",
        description="Bayesian selection of main effects, interactions and "
        "nonlinear effects of exposure mixtures.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit the model to a CSV file")
    f.add_argument("--data", required=True, help="input CSV")
    f.add_argument("--response", required=True)
    f.add_argument("--covariates", default="", help="comma-separated covariate columns")
    f.add_argument("--exposures", default="",
                   help="comma-separated exposure columns (default: all others)")
    f.add_argument("--lod-file", default=None, help="two-column CSV: column, raw-scale LOD")
    f.add_argument("--log10", default="", help="comma-separated columns to log10-transform")
    f.add_argument("--no-standardize", action="store_true")
    f.add_argument("--holdout", type=int, default=0,
                   help="rows held out for test MSE and interval coverage")
    f.add_argument("--factors", type=int, default=None,
                   help="factor count for imputation (default: 85%% variability rule)")
    f.add_argument("--export-imputations", action="store_true",
                   help="write imputed cells of every sweep (last chain) to imputations.csv")
    f.add_argument("--dose-response", default="all",
                   help="'all', 'none' or comma-separated exposures")
    f.add_argument("--projection", choices=("full", "exposures"), default="full")
    _common(f)

    pr = sub.add_parser("predict", help="score new data with a fitted samples directory")
    pr.add_argument("--samples", required=True, help="output directory of `fit`")
    pr.add_argument("--data", required=True, help="CSV with the training columns")
    pr.add_argument("--alpha", type=float, default=0.05)
    pr.add_argument("--out", required=True)
    pr.add_argument("--config")
    pr.add_argument("-v", "--verbose", action="store_true")

    s = sub.add_parser("simulate", help="replicated simulation study")
    s.add_argument("--scenario", choices=("a", "b", "c"), required=True)
    s.add_argument("--n", type=int, default=500)
    s.add_argument("--p", type=int, default=10)
    s.add_argument("--replications", type=int, default=10)
    s.add_argument("--holdout", type=int, default=100)
    s.add_argument("--noise-sd", type=float, default=1.0)
    _common(s)

    d = sub.add_parser("diagnose", help="ESS, Geweke and coverage for a samples directory")
    d.add_argument("--samples", help="output directory of `fit`")
    d.add_argument("--data", help="holdout CSV for predictive coverage")
    d.add_argument("--alphas", default="0.05,0.5")
    d.add_argument("--compare", nargs="+", metavar="NAME=METRICS_CSV",
                   help="metrics files of several methods; writes relative_metrics.csv")
    d.add_argument("--out", required=True)
    d.add_argument("--config")
    d.add_argument("-v", "--verbose", action="store_true")
    return parser


def _config_path(argv):
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if a.startswith("--config="):
            return a.split("=", 1)[1]
    return None


def parse_args(argv):
    """Parse ``argv``, letting a ``--config`` file supply defaults."""
    parser = build_parser()
    argv = list(argv)
    path = _config_path(argv)
    command = next((a for a in argv if a in COMMANDS), None)
    if path and command:
        try:
            conf = read_config(path)
        except OSError as exc:
            parser.error(f"cannot read config file: {exc}")
        except ParseError as exc:
            parser.error(str(exc))
        sub = parser._subparsers._group_actions[0].choices[command]
        known = {a.dest: a for a in sub._actions}
        defaults = {}
        for key, value in conf.items():
            if key not in known or key in ("config", "help"):
                sub.error(f"unknown key {key!r} in config file")
            action = known[key]
            if isinstance(action, argparse._StoreTrueAction):
                v = value.lower()
                if v not in BOOL_TRUE | BOOL_FALSE:
                    sub.error(f"config key {key!r} needs a boolean")
                defaults[key] = v in BOOL_TRUE
            elif action.nargs in ("+", "*"):
                defaults[key] = value.split()
            else:
                defaults[key] = value  # argparse applies the type to string defaults
            action.required = False
        sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def _prior(args):
    return PriorConfig(heredity=args.heredity)


def _write_summary(samples, path):
    rows = []
    def add(name, draws, incl):
        q = np.quantile(draws, [0.025, 0.975])
        rows.append([name, incl, float(np.mean(draws)), q[0], q[1]])
    for j, name in enumerate(samples.x_names):
        add(f"beta[{name}]", samples.beta[:, j], float(np.mean(samples.beta[:, j] != 0)))
    for i, label in enumerate(pair_labels(samples.x_names)):
        add(f"lambda[{label}]", samples.lam[:, i], float(np.mean(samples.lam[:, i] != 0)))
    for j, name in enumerate(samples.z_names):
        add(f"alpha[{name}]", samples.alpha[:, j], 1.0)
    for j, name in enumerate(samples.x_names):
        add(f"rho[{name}]", samples.rho[:, j], float(np.mean(samples.rho[:, j] > 0)))
    add("tau_star", samples.scalars["tau_star"], samples.prob_nonlinear())
    add("sigma2", samples.scalars["sigma2"], 1.0)
    write_table(path, ["parameter", "inclusion", "mean", "lower95", "upper95"], rows)


def cmd_fit(args):
    schema = TransformSpec(set(_names(args.log10)), standardize=not args.no_standardize)
    data = load_csv(
        args.data, schema, response=args.response, covariates=_names(args.covariates),
        exposures=_names(args.exposures) or None, lod=args.lod_file, add_intercept=True,
    )
    holdout = None
    if args.holdout:
        data, holdout = train_test_split(data, args.holdout, args.seed)
    imputer = None
    if not data.is_complete:
        imputer = FactorImputer(k=args.factors, keep_history=args.export_imputations)
        log.info("imputing %d missing and %d censored cells",
                 data.missing_mask.sum(), data.censored_mask.sum())
    os.makedirs(args.out, exist_ok=True)
    t0 = time.perf_counter()
    samples = run_chains(
        data, _prior(args), iterations=args.iters, burn_in=args.burnin, seed=args.seed,
        m=args.m, chains=args.chains, jobs=args.jobs, imputer=imputer,
        projection=args.projection,
    )
    elapsed = time.perf_counter() - t0
    extra = {
        "command": "fit",
        "data": os.path.abspath(args.data),
        "response": data.response_name,
        "scales": {k: list(v) for k, v in data.scales.items()},
        "log10_applied": sorted(data.log10_applied),
        "response_shift": data.response_shift,
        "backend": backend.NAME,
        "elapsed_seconds": elapsed,
    }
    write_samples(samples, os.path.join(args.out, "samples"), timing=False)
    with open(os.path.join(args.out, "samples", "manifest.json")) as fh:
        manifest = {**json.load(fh), **extra}
    with open(os.path.join(args.out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_summary(samples, os.path.join(args.out, "summary.csv"))

    report = diagnose(samples, holdout)
    report.write_csv(os.path.join(args.out, "diagnostics.csv"))
    if holdout is not None:
        report.write_coverage_csv(os.path.join(args.out, "coverage.csv"))
        pred = predict(samples, holdout.X, holdout.Z)
        write_table(os.path.join(args.out, "metrics.csv"),
                    ["test_mse", "coverage95"],
                    [[test_mse(holdout.y, pred.mean), report.coverage[0.05]]])
    with open(os.path.join(args.out, "summary.txt"), "w") as fh:
        fh.write(report.summary() + "\n")

    if args.dose_response != "none":
        wanted = samples.x_names if args.dose_response == "all" else _names(args.dose_response)
        for name in wanted:
            if name not in samples.x_names:
                raise DataError(f"unknown exposure {name!r} for --dose-response")
            curve = dose_response_curve(samples, data, samples.x_names.index(name))
            curve.write_csv(os.path.join(args.out, f"dose_response_{name}.csv"))
    if imputer is not None and args.export_imputations:
        imputer = samples.meta["imputer"]  # last chain; may be a worker's copy
        rows = []
        cells = np.argwhere(imputer._missing | imputer._censored)
        cols = [data.column_names[c] for c in imputer.columns]
        for it, vals in enumerate(imputer.history):
            for (i, j), v in zip(cells, vals):
                rows.append([str(it), str(int(i)), cols[j], v])
        write_table(os.path.join(args.out, "imputations.csv"),
                    ["sweep", "row", "column", "value"], rows)
    print(report.summary())
    return EXIT_OK


def _reference(man):
    return SimpleNamespace(
        column_names=man["x_names"] + man["z_names"],
        log10_applied=frozenset(man["log10_applied"]),
        scales={k: tuple(v) for k, v in man["scales"].items()},
        response_name=man["response"],
        response_shift=man["response_shift"],
    )


def _load_like(path, man, require_response):
    from .data import INTERCEPT

    z_names = [z for z in man["z_names"] if z != INTERCEPT]
    raw = load_csv(path, None, response=man["response"], covariates=z_names,
                   exposures=man["x_names"], require_response=require_response)
    if INTERCEPT in man["z_names"]:
        raw = add_intercept(raw)
    return transform_like(raw, _reference(man))


def cmd_predict(args):
    man_path = os.path.join(args.samples, "manifest.json")
    with open(man_path) as fh:
        man = json.load(fh)
    samples = read_samples(os.path.join(args.samples, "samples"))
    new = _load_like(args.data, man, require_response=False)
    if not new.is_complete:
        raise DataError("prediction rows must have no missing or censored values")
    pred = predict(samples, new.X, new.Z, alpha=args.alpha)
    shift = man.get("response_shift", 0.0)
    os.makedirs(args.out, exist_ok=True)
    write_table(
        os.path.join(args.out, "predictions.csv"),
        ["row", "mean", "lower", "upper"],
        ([str(i), m + shift, lo + shift, hi + shift]
         for i, (m, lo, hi) in enumerate(zip(pred.mean, pred.lower, pred.upper))),
    )
    if np.all(np.isfinite(new.y)):
        mse = test_mse(new.y, pred.mean)
        inside = float(np.mean((new.y >= pred.lower) & (new.y <= pred.upper)))
        write_table(os.path.join(args.out, "metrics.csv"), ["test_mse", "coverage"],
                    [[mse, inside]])
        print(f"test MSE {fmt(mse)}, coverage {inside:.3f}")
    return EXIT_OK


def cmd_simulate(args):
    spec = ScenarioSpec(args.scenario, args.n, args.p, args.noise_sd, args.seed)
    config = RunConfig(
        heredity=args.heredity, iterations=args.iters, burn_in=args.burnin, m=args.m,
        seed=args.seed, out_dir=args.out, holdout=args.holdout, chains=args.chains,
        jobs=args.jobs,
    )
    rows, summary = run_experiment(config, spec, args.replications)
    with open(os.path.join(args.out, "manifest.json"), "w") as fh:
        json.dump({"command": "simulate", "scenario": asdict(spec),
                   "config": asdict(config), "replications": args.replications,
                   "backend": backend.NAME}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for k, v in summary.items():
        print(f"{k}: {v}")
    failed = summary["failed"]
    if failed:
        print(f"{failed} replication(s) failed; see replications.csv", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_diagnose(args):
    os.makedirs(args.out, exist_ok=True)
    did = False
    if args.samples:
        with open(os.path.join(args.samples, "manifest.json")) as fh:
            man = json.load(fh)
        samples = read_samples(os.path.join(args.samples, "samples"))
        holdout = None
        if args.data:
            holdout = _load_like(args.data, man, require_response=True)
        alphas = [float(a) for a in _names(args.alphas)]
        report = diagnose(samples, holdout, alphas)
        report.write_csv(os.path.join(args.out, "diagnostics.csv"))
        if holdout is not None:
            report.write_coverage_csv(os.path.join(args.out, "coverage.csv"))
        print(report.summary())
        did = True
    if args.compare:
        results = {}
        for item in args.compare:
            name, sep, path = item.partition("=")
            if not sep:
                raise DataError(f"--compare expects NAME=PATH, got {item!r}")
            results[name] = read_metrics(path)
        rel = relative_to_best(results)
        metrics = sorted({k for r in rel.values() for k in r})
        with open(os.path.join(args.out, "relative_metrics.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["method"] + metrics)
            for name, r in rel.items():
                w.writerow([name] + ["" if r[m] is None else fmt(r[m]) for m in metrics])
        did = True
    if not did:
        raise DataError("diagnose needs --samples and/or --compare")
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "predict": cmd_predict, "simulate": cmd_simulate,
            "diagnose": cmd_diagnose}


def main(argv=None):
    args = parse_args(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except ParseError as exc:
        print(f"mixselect: parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError, ValueError) as exc:
        print(f"mixselect: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SamplerError as exc:
        print(f"mixselect: sampler failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
