import numpy as np
import pytest

from mixselect.data import add_intercept, from_arrays


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def linear_data(rng):
    """Small well-specified linear dataset with an intercept covariate."""
    n, p = 120, 4
    X = rng.standard_normal((n, p))
    y = 1.5 * X[:, 0] - X[:, 1] + 0.5 + rng.standard_normal(n)
    return add_intercept(from_arrays(y, X))


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
