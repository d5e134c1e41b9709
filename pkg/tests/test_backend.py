import os
import subprocess
import sys

import numpy as np
import pytest

from mixselect import _kernels_py, backend
from oracles import dense_kernel


def test_backend_name_is_known():
    assert backend.NAME in ("cython", "python")


@pytest.mark.parametrize("impl", ["backend", "python"])
def test_gram_matches_loop_oracle(rng, impl):
    mod = backend if impl == "backend" else _kernels_py
    X = rng.standard_normal((17, 3))
    rho = np.array([0.3, 1.2, 0.05])
    K = mod.ard_gram(X, rho, 2.5)
    np.testing.assert_allclose(K, dense_kernel(X, X, rho, 2.5), rtol=1e-13, atol=0)
    assert np.array_equal(K, K.T)
    assert np.all(np.diag(K) == 2.5)


def test_cross_matches_loop_oracle(rng):
    A = rng.standard_normal((7, 2))
    B = rng.standard_normal((5, 2))
    rho = np.array([0.7, 0.2])
    np.testing.assert_allclose(backend.ard_cross(A, B, rho, 1.3),
                               dense_kernel(A, B, rho, 1.3), rtol=1e-13)


@pytest.mark.skipif(backend.NAME != "cython", reason="extension not built")
def test_extension_and_fallback_agree(rng):
    X = rng.standard_normal((40, 5))
    rho = rng.gamma(0.5, 2.0, 5)
    a = backend.ard_gram(X, rho, 1.7)
    b = _kernels_py.ard_gram(X, rho, 1.7)
    np.testing.assert_allclose(a, b, rtol=1e-14, atol=1e-300)


def test_environment_switch_forces_fallback():
    env = dict(os.environ, MIXSELECT_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "import mixselect.backend as b; print(b.NAME)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"
