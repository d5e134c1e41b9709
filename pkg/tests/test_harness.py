import numpy as np
import pytest

from mixselect.harness import (
    RunConfig,
    ScenarioSpec,
    generate_scenario,
    mean_function,
    read_metrics,
    relative_to_best,
    replication_seeds,
    run_experiment,
    scenario_truth,
)


def test_mean_functions_at_known_points():
    assert mean_function("a", np.zeros((1, 5)))[0] == pytest.approx(2.0)
    assert mean_function("b", np.ones((1, 4)))[0] == pytest.approx(-2.0)
    assert mean_function("c", np.zeros((1, 3)))[0] == pytest.approx(1.0)
    x = np.array([[1.0, 2.0, 0.0, 0.0, 0.0]])
    # 1 - 2 + 0 + 2*1*2 - 0 + 0 + 4/2
    assert mean_function("a", x)[0] == pytest.approx(5.0)


def test_extra_exposures_are_inert(rng):
    X = rng.standard_normal((10, 8))
    for sid, p in (("a", 5), ("b", 4), ("c", 3)):
        Y = X.copy()
        Y[:, p:] = rng.standard_normal((10, 8 - p))
        np.testing.assert_array_equal(mean_function(sid, X), mean_function(sid, Y))


def test_truth_sets():
    ta = scenario_truth(ScenarioSpec("a", 50, 6))
    assert ta.main == {1, 2, 3} and ta.nonlinear == {4, 5}
    assert ta.interactions == {(1, 2), (1, 3)}
    tb = scenario_truth(ScenarioSpec("b", 50, 10))
    assert tb.main == {1, 2, 3, 4} and not tb.nonlinear
    assert tb.interactions == {(1, 2), (1, 3), (2, 3), (3, 4)}
    tc = scenario_truth(ScenarioSpec("c", 50, 3))
    assert not tc.main and tc.nonlinear == {1, 3}


def test_spec_validation():
    with pytest.raises(ValueError):
        ScenarioSpec("d", 10, 5)
    with pytest.raises(ValueError):
        ScenarioSpec("a", 10, 4)
    with pytest.raises(ValueError):
        RunConfig(iterations=10, burn_in=10)


def test_generation_is_seeded():
    spec = ScenarioSpec("b", 40, 5, seed=3)
    d1, _ = generate_scenario(spec)
    d2, _ = generate_scenario(spec)
    assert np.array_equal(d1.y, d2.y) and np.array_equal(d1.X, d2.X)
    assert d1.z_names == ["(Intercept)"]
    noise = d1.y - mean_function("b", d1.X)
    assert abs(noise.std() - 1.0) < 0.35


def test_replication_seeds_distinct():
    seeds = replication_seeds(0, 5)
    assert len(set(seeds)) == 5
    assert replication_seeds(0, 5) == seeds


def test_experiment_outputs_and_determinism(tmp_path):
    spec = ScenarioSpec("b", 60, 4)
    cfg = RunConfig(iterations=40, m=20, seed=2, holdout=30, out_dir=str(tmp_path / "one"))
    rows, summary = run_experiment(cfg, spec, replications=2)
    assert [r["status"] for r in rows] == ["ok", "ok"]
    assert summary["replications"] == 2 and summary["failed"] == 0
    cfg2 = RunConfig(iterations=40, m=20, seed=2, holdout=30, out_dir=str(tmp_path / "two"))
    run_experiment(cfg2, spec, replications=2)
    for name in ("replications.csv", "metrics.csv"):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()
    m = read_metrics(tmp_path / "one" / "metrics.csv")
    assert m["test_mse"] == pytest.approx(summary["test_mse"])


def test_failed_replication_is_recorded(monkeypatch, tmp_path):
    from mixselect import harness

    def boom(*args, **kwargs):
        raise RuntimeError("diverged")

    monkeypatch.setattr(harness, "run_chains", boom)
    rows, summary = run_experiment(RunConfig(iterations=5, holdout=5), ScenarioSpec("c", 20, 3), 2)
    assert all(r["status"].startswith("failed: RuntimeError") for r in rows)
    assert summary["failed"] == 2 and summary["test_mse"] is None


def test_relative_to_best():
    out = relative_to_best({"a": {"test_mse": 2.0, "frobenius": 1.0},
                            "b": {"test_mse": 1.0, "frobenius": None}})
    assert out["a"]["test_mse"] == 2.0 and out["b"]["test_mse"] == 1.0
    assert out["a"]["frobenius"] == 1.0 and out["b"]["frobenius"] is None
    with pytest.raises(ValueError):
        relative_to_best({"a": {}})
