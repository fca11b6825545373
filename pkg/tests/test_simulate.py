import csv
import json
import math

import numpy as np
import pytest

from fairfis.fairness import BiasMetric
from fairfis.simulate import (
    SimulationSpec,
    ar_precision,
    covariance,
    fit_and_score,
    gen_design,
    gen_response,
    large_p_spec,
    replicate_seeds,
    run_replicates,
    scenario_f,
    simulate,
    write_sidecar,
)
from fairfis.data import write_dataset


def test_protected_rate():
    _, z = gen_design(SimulationSpec(n=100_000, seed=1))
    assert abs(z.mean() - 0.2) <= 0.01


def test_no_shift_means_equal_within_three_se():
    x, z = gen_design(SimulationSpec(n=20_000, alpha=0.0, seed=21))
    for j in range(x.shape[1]):
        a, b = x[z == 1, j], x[z == 0, j]
        se = math.sqrt(a.var(ddof=1) / len(a) + b.var(ddof=1) / len(b))
        assert abs(a.mean() - b.mean()) <= 3 * se


def test_shift_applies_to_biased_groups_only():
    spec = SimulationSpec(n=20_000, seed=3)
    x, z = gen_design(spec)
    gap = x[z == 1].mean(axis=0) - x[z == 0].mean(axis=0)
    np.testing.assert_allclose(gap[:6], 2.0, atol=0.1)
    np.testing.assert_allclose(gap[6:], 0.0, atol=0.1)


def test_ar_precision_recovered_from_draws():
    spec = SimulationSpec(n=100_000, p=12, alpha=0.0, sigma="ar_precision", seed=4)
    x, _ = gen_design(spec)
    empirical = np.linalg.inv(np.cov(x, rowvar=False))
    off = np.diag(empirical, 1)
    assert np.all(np.abs(off - 0.5) <= 0.05)
    np.testing.assert_allclose(covariance(spec) @ ar_precision(12), np.eye(12), atol=1e-10)


@pytest.mark.parametrize("p", [4, 8, 12, 40, 100, 250])
def test_ar_precision_positive_definite(p):
    q = ar_precision(p)
    assert np.linalg.eigvalsh(q).min() > 0
    np.testing.assert_array_equal(np.diag(q), 1.0)


def test_scenario_functions():
    spec = SimulationSpec()
    assert scenario_f(spec, np.zeros(12)) == 0.0
    sin_spec = SimulationSpec(scenario="additive_sin")
    row = np.zeros(12)
    row[0] = math.pi
    assert abs(scenario_f(sin_spec, row)) <= 1e-12
    assert scenario_f(SimulationSpec(scenario="interactions"), np.zeros(12)) == 0.0
    row = np.arange(12.0)
    assert scenario_f(spec, row) == pytest.approx(sum(range(3)) + sum(range(6, 9)))
    with pytest.raises(ValueError):
        scenario_f(spec, np.zeros(5))


def test_interaction_pairs():
    spec = SimulationSpec(scenario="interactions")
    pairs = spec.interaction_pairs()
    lead = [0, 1, 3, 4, 6, 7, 9, 10]
    assert len(pairs) == 28
    assert all(l < k and l in lead and k in lead for l, k in pairs)
    row = np.zeros(12)
    row[[0, 1]] = 1.0
    # beta on x0, x1 plus the single active pair sin(x0 * x1)
    assert scenario_f(spec, row) == pytest.approx(2 + math.sin(1.0))


def test_response_noise_and_rates():
    n = 100_000
    y = gen_response(SimulationSpec(task="regression", n=n, seed=5), np.zeros(n)).values
    assert abs(y.var(ddof=1) - 1) <= 0.02
    y = gen_response(SimulationSpec(n=n, seed=6), np.zeros(n)).values
    assert abs(y.mean() - 0.5) <= 0.01
    y = gen_response(SimulationSpec(n=n, seed=7), np.full(n, 20.0)).values
    assert set(np.unique(y)) <= {0, 1}
    assert np.count_nonzero(y == 0) <= 1


def test_spec_defaults_and_validation():
    assert (SimulationSpec().alpha, SimulationSpec().beta) == (2.0, 1.0)
    reg = SimulationSpec(task="regression")
    assert (reg.alpha, reg.beta) == (0.4, 3.0)
    with pytest.raises(ValueError):
        SimulationSpec(p=10)
    with pytest.raises(ValueError):
        SimulationSpec(pi_z=1.0)
    big = large_p_spec()
    sizes = [len(g) for g in big.groups()]
    assert sizes == [5, 5, 5, 235]
    np.testing.assert_array_equal(np.concatenate(big.groups()), np.arange(250))


def test_simulation_is_deterministic(tmp_path):
    spec = SimulationSpec(scenario="interactions", n=200, seed=9)
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for path in paths:
        write_dataset(simulate(spec), path)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    write_sidecar(spec, tmp_path / "s.json")
    assert json.loads((tmp_path / "s.json").read_text())["scenario"] == "interactions"


def test_single_replicate_equals_single_fit():
    spec = SimulationSpec(n=300, seed=10)
    summary = run_replicates(spec, "tree", BiasMetric(), 1)
    data_seed, model_seed = replicate_seeds(spec.seed, 1)[0]
    d = simulate(SimulationSpec(n=300, seed=data_seed))
    direct = fit_and_score(d, "tree", BiasMetric(), model_seed)
    np.testing.assert_array_equal(summary.mean_fis, direct.fis)
    np.testing.assert_array_equal(summary.mean_fairfis, direct.fairfis)
    np.testing.assert_array_equal(summary.sd_fis, 0.0)


def test_replicates_are_deterministic_and_thread_independent(tmp_path):
    spec = SimulationSpec(n=200, seed=11)
    a = run_replicates(spec, "tree", BiasMetric(), 4)
    b = run_replicates(spec, "tree", BiasMetric(), 4, n_jobs=3)
    a.write_csv(tmp_path / "a.csv")
    b.write_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    with (tmp_path / "a.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["feature", "group", "mean_fis", "sd_fis", "mean_fairfis", "sd_fairfis"]
    assert [r["group"] for r in rows] == ["G1"] * 3 + ["G2"] * 3 + ["G3"] * 3 + ["G4"] * 3


def test_group_means_are_member_means():
    summary = run_replicates(SimulationSpec(n=200, seed=12), "tree", BiasMetric(), 3)
    groups = summary.group_means()
    for g, cols in zip(("G1", "G2", "G3", "G4"), np.arange(12).reshape(4, 3)):
        assert groups[g]["fis"] == pytest.approx(summary.mean_fis[cols].mean(), abs=1e-15)
        assert groups[g]["fairfis"] == pytest.approx(summary.mean_fairfis[cols].mean(), abs=1e-15)
    np.testing.assert_allclose(summary.sd_fairfis, summary.fairfis.std(axis=0, ddof=1))


@pytest.mark.parametrize("model", ["forest", "boosting"])
def test_ensemble_replicates_run(model):
    summary = run_replicates(SimulationSpec(n=200, seed=13), model, BiasMetric(), 2, n_trees=5, n_stages=5)
    assert summary.fis.shape == (2, 12)
    np.testing.assert_allclose(summary.fis.sum(axis=1), 1.0)


def test_signal_features_outrank_noise():
    summary = run_replicates(SimulationSpec(n=1000, seed=14), "tree", BiasMetric(), 10)
    signal = summary.mean_fis[np.r_[0:3, 6:9]]
    noise = summary.mean_fis[np.r_[3:6, 9:12]]
    assert signal.min() > noise.max()
