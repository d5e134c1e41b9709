import math

import numpy as np
import pytest

from mixselect.data import add_intercept, from_arrays
from mixselect.metrics import (
    SelectionTruth,
    autocorrelation,
    diagnose,
    dose_response_curve,
    ess,
    frobenius_distance,
    geweke,
    interval_coverage,
    spectral_variance,
    test_mse as mse,
    tp_tn_rates,
)
from mixselect.sampler import PriorConfig, run_chain
from oracles import ar1


def test_frobenius_is_a_metric(rng):
    A, B, C = (rng.standard_normal((4, 4)) for _ in range(3))
    assert frobenius_distance(A, A) == 0.0
    assert frobenius_distance(A, B) == pytest.approx(frobenius_distance(B, A))
    assert frobenius_distance(A, C) <= frobenius_distance(A, B) + frobenius_distance(B, C)
    assert frobenius_distance(A, B) == pytest.approx(math.sqrt(np.trace((A - B).T @ (A - B))))
    with pytest.raises(ValueError):
        frobenius_distance(A, np.zeros((3, 3)))


def test_mse_basic():
    assert mse([1.0, 2.0], [1.0, 4.0]) == 2.0
    with pytest.raises(ValueError):
        mse([1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        mse([], [])


def test_selection_truth_validation():
    t = SelectionTruth(p=4, main=(1, 2), interactions=((2, 1),), nonlinear=(4,))
    assert t.interactions == frozenset({(1, 2)})
    assert t.interaction_matrix()[0, 1] == 1.0
    with pytest.raises(ValueError):
        SelectionTruth(p=3, main=(4,))
    with pytest.raises(ValueError):
        SelectionTruth(p=3, interactions=((2, 2),))


def test_rates_agree_with_set_arithmetic(rng):
    p = 6
    for _ in range(50):
        truth = SelectionTruth(
            p=p,
            main=tuple(np.flatnonzero(rng.random(p) < 0.5) + 1),
            interactions=tuple((a + 1, b + 1) for a in range(p) for b in range(a + 1, p)
                               if rng.random() < 0.3),
            nonlinear=tuple(np.flatnonzero(rng.random(p) < 0.4) + 1),
        )
        main = rng.random(p)
        nonlin = rng.random(p)
        inter = np.triu(rng.random((p, p)), 1)
        rates = tp_tn_rates({"main": main, "interaction": inter, "nonlinear": nonlin}, truth)

        def check(selected, true, universe, got):
            tp = len(selected & true) / len(true) if true else None
            neg = universe - true
            tn = len(neg - selected) / len(neg) if neg else None
            assert got == (pytest.approx(tp) if tp is not None else None,
                           pytest.approx(tn) if tn is not None else None)

        idx = set(range(1, p + 1))
        check({j + 1 for j in range(p) if main[j] > 0.5}, set(truth.main), idx, rates["main"])
        check({j + 1 for j in range(p) if nonlin[j] > 0.5}, set(truth.nonlinear), idx,
              rates["nonlinear"])
        pairs = {(a + 1, b + 1) for a in range(p) for b in range(a + 1, p)}
        sel = {(a + 1, b + 1) for a, b in zip(*np.nonzero(inter > 0.5))}
        check(sel, set(truth.interactions), pairs, rates["interaction"])


def test_rates_threshold_validation():
    with pytest.raises(ValueError):
        tp_tn_rates({"main": np.ones(2)}, SelectionTruth(p=2), inclusion_threshold=1.0)


def test_autocorrelation_lag_zero_is_one(rng):
    r = autocorrelation(rng.standard_normal(100))
    assert r[0] == pytest.approx(1.0)
    assert np.all(autocorrelation(np.ones(20)) == 0)


def test_ess_iid_and_ar1(rng):
    n = 20000
    iid = [ess(rng.standard_normal(n)) for _ in range(20)]
    assert np.mean(iid) == pytest.approx(n, rel=0.1)
    vals = [ess(ar1(n, 0.5, rng)) for _ in range(20)]
    assert np.mean(vals) == pytest.approx(n / 3, rel=0.1)


def test_ess_degenerate_and_invalid():
    assert ess(np.zeros(50), return_degenerate=True) == (50.0, True)
    with pytest.raises(ValueError):
        ess(np.zeros(5))
    with pytest.raises(ValueError):
        ess(np.array([np.nan] * 20))


def test_spectral_variance_white_noise(rng):
    x = rng.standard_normal(100000)
    assert spectral_variance(x) == pytest.approx(1.0, rel=0.05)


def test_geweke_null_calibration(rng):
    z = np.array([geweke(rng.standard_normal(1000)).z for _ in range(1000)])
    assert np.mean(np.abs(z) < 3) >= 0.99
    assert np.mean(np.abs(z) < 1.96) == pytest.approx(0.95, abs=0.03)


def test_geweke_detects_shift(rng):
    x = rng.standard_normal(1000)
    x[:250] += 1.0
    res = geweke(x)
    assert abs(res.z) > 5 and res.pvalue < 1e-6


def test_geweke_mirror_and_affine_invariance(rng):
    x = ar1(2000, 0.3, rng)
    z = geweke(x).z
    assert geweke(x[::-1]).z == pytest.approx(-z, rel=1e-9)
    assert geweke(3.0 * x + 7.0).z == pytest.approx(z, rel=1e-9)
    assert geweke(-x).z == pytest.approx(-z, rel=1e-9)


def test_geweke_degenerate_and_invalid():
    res, dg = geweke(np.ones(200), return_degenerate=True)
    assert dg and res.z == 0.0 and res.pvalue == 1.0
    with pytest.raises(ValueError):
        geweke(np.zeros(50))
    with pytest.raises(ValueError):
        geweke(np.zeros(200), frac_a=0.6, frac_b=0.6)


@pytest.fixture(scope="module")
def fitted_linear():
    rng = np.random.default_rng(3)
    n, p = 150, 3
    X = rng.standard_normal((n + 400, p))
    y = X[:, 0] - 0.5 * X[:, 2] + 0.3 + rng.standard_normal(n + 400)
    data = add_intercept(from_arrays(y, X))
    train, test = data.subset(np.arange(n)), data.subset(np.arange(n, n + 400))
    s = run_chain(train, PriorConfig(), iterations=1000, seed=5, m=50)
    return s, train, test


def test_interval_coverage_well_specified(fitted_linear):
    s, _, test = fitted_linear
    cov = interval_coverage(s, test, alphas=(0.05, 0.5, 0.0, 1.0))
    assert cov[0.05] == pytest.approx(0.95, abs=0.04)
    assert cov[0.5] == pytest.approx(0.5, abs=0.08)
    assert cov[0.0] == 1.0 and cov[1.0] == 0.0


def test_diagnose_report(fitted_linear, tmp_path):
    s, _, test = fitted_linear
    rep = diagnose(s, test)
    assert "sigma2" in rep.ess and "beta[x1]" in rep.geweke_z
    rep.write_csv(tmp_path / "d.csv")
    rep.write_coverage_csv(tmp_path / "c.csv")
    text = (tmp_path / "d.csv").read_text().splitlines()
    assert text[0] == "parameter,ess,geweke_z,geweke_p,degenerate"
    assert "coverage of 95% intervals" in rep.summary()


def test_dose_response_curve(fitted_linear):
    s, train, _ = fitted_linear
    curve = dose_response_curve(s, train, 0, grid=20)
    assert curve.grid.shape == (20,)
    assert np.all(curve.lower <= curve.median) and np.all(curve.median <= curve.upper)
    slope = np.polyfit(curve.grid, curve.median, 1)[0]
    assert slope == pytest.approx(1.0, abs=0.3)
    with pytest.raises(IndexError):
        dose_response_curve(s, train, 5)
