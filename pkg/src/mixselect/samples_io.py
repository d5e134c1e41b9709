"""Reading and writing posterior samples as CSV tables plus a JSON manifest.

Numbers are written with ``%.17g`` so that a round trip is exact and two
runs with the same seed give byte-identical files.
"""
from __future__ import annotations

import csv
import json
import os

import numpy as np

from .sampler.chain import SCALAR_NAMES, PosteriorSamples, pair_labels
from .sampler.state import PriorConfig

BLOCKS = ("beta", "lambda", "alpha", "rho", "scalars")


def fmt(v):
    return "%.17g" % v


def write_table(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in row])


def read_table(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = [row for row in r]
    return header, rows


def _block(samples, name):
    if name == "beta":
        return list(samples.x_names), samples.beta
    if name == "lambda":
        return pair_labels(samples.x_names), samples.lam
    if name == "alpha":
        return list(samples.z_names), samples.alpha
    if name == "rho":
        return list(samples.x_names), samples.rho
    return list(SCALAR_NAMES), np.column_stack([samples.scalars[k] for k in SCALAR_NAMES])


def _iteration_index(samples):
    """Iteration number of each retained draw, restarting for every chain."""
    it = np.empty(samples.n_draws, dtype=int)
    for c in np.unique(samples.chain):
        idx = np.nonzero(samples.chain == c)[0]
        it[idx] = samples.burn_in + samples.thin * np.arange(idx.size)
    return it


def write_samples(samples, directory, manifest_extra=None, timing=True):
    """Write ``beta/lambda/alpha/rho/scalars.csv``, ``training.csv`` and ``manifest.json``.

    With ``timing=False`` the elapsed time is omitted from the manifest, so
    the whole directory is reproducible byte for byte.
    """
    os.makedirs(directory, exist_ok=True)
    iters = _iteration_index(samples)
    for name in BLOCKS:
        header, values = _block(samples, name)
        rows = (
            [str(int(c)), str(int(i))] + list(v)
            for c, i, v in zip(samples.chain, iters, values)
        )
        write_table(os.path.join(directory, f"{name}.csv"), ["chain", "iter"] + header, rows)
    cols = samples.x_names + samples.z_names
    train = np.column_stack([samples.y_train, samples.X_train, samples.Z_train])
    write_table(os.path.join(directory, "training.csv"), ["y"] + cols, train)
    manifest = {
        "seed": samples.seed,
        "iterations": samples.iterations,
        "burn_in": samples.burn_in,
        "thin": samples.thin,
        "m": samples.m,
        "oversampling": samples.oversampling,
        "power_iters": samples.power_iters,
        "projection": samples.projection,
        "prior": samples.prior.to_dict(),
        "x_names": samples.x_names,
        "z_names": samples.z_names,
        "chains": int(np.unique(samples.chain).size),
    }
    if timing and "elapsed_seconds" in samples.meta:
        manifest["elapsed_seconds"] = samples.meta["elapsed_seconds"]
    manifest.update(manifest_extra or {})
    with open(os.path.join(directory, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_samples(directory):
    """Inverse of :func:`write_samples`."""
    with open(os.path.join(directory, "manifest.json")) as fh:
        man = json.load(fh)
    arrays = {}
    chain = None
    for name in BLOCKS:
        header, rows = read_table(os.path.join(directory, f"{name}.csv"))
        data = np.array([[float(v) for v in row] for row in rows]).reshape(len(rows), len(header))
        if chain is None:
            chain = data[:, 0].astype(int)
        arrays[name] = data[:, 2:]
    _, rows = read_table(os.path.join(directory, "training.csv"))
    train = np.array([[float(v) for v in row] for row in rows])
    p, q = len(man["x_names"]), len(man["z_names"])
    return PosteriorSamples(
        beta=arrays["beta"],
        lam=arrays["lambda"],
        alpha=arrays["alpha"],
        rho=arrays["rho"],
        scalars={k: arrays["scalars"][:, i] for i, k in enumerate(SCALAR_NAMES)},
        x_names=man["x_names"],
        z_names=man["z_names"],
        prior=PriorConfig.from_dict(man["prior"]),
        seed=man["seed"],
        iterations=man["iterations"],
        burn_in=man["burn_in"],
        thin=man["thin"],
        m=man["m"],
        oversampling=man["oversampling"],
        power_iters=man["power_iters"],
        projection=man["projection"],
        y_train=train[:, 0],
        X_train=train[:, 1 : 1 + p],
        Z_train=train[:, 1 + p : 1 + p + q],
        chain=chain,
        meta={"manifest": man},
    )
