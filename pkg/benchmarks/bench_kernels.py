"""Time the compiled ARD kernels against the numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--sizes 100,500,1000] [--p 10] [--repeat 5]

Prints one row per size with the best-of-``repeat`` wall time of each
implementation, their ratio and the largest absolute difference.
"""
import argparse
import timeit

import numpy as np

from mixselect import _kernels_py

try:
    from mixselect import _kernels_ext
except ImportError:  # extension not built
    _kernels_ext = None


def best_time(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="100,500,1000,2000")
    parser.add_argument("--p", type=int, default=10)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    if _kernels_ext is None:
        print("compiled extension not available; rebuild with "
              "`pip install -e . --no-build-isolation`")
        return 1
    rng = np.random.default_rng(args.seed)
    rho = rng.gamma(0.5, 2.0, args.p)
    print(f"{'kernel':<6} {'n':>6} {'numpy s':>10} {'cython s':>10} {'speedup':>8} {'max diff':>10}")
    for n in (int(s) for s in args.sizes.split(",")):
        X = rng.standard_normal((n, args.p))
        Y = rng.standard_normal((n // 2, args.p))
        cases = (
            ("gram", lambda m: m.ard_gram(X, rho, 1.3)),
            ("cross", lambda m: m.ard_cross(Y, X, rho, 1.3)),
        )
        for name, call in cases:
            t_py = best_time(lambda: call(_kernels_py), args.repeat)
            t_ext = best_time(lambda: call(_kernels_ext), args.repeat)
            diff = np.max(np.abs(call(_kernels_py) - call(_kernels_ext)))
            print(f"{name:<6} {n:>6} {t_py:>10.4f} {t_ext:>10.4f} {t_py / t_ext:>8.2f} {diff:>10.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
