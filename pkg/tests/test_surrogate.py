import logging

import numpy as np
import pytest

from fairfis.data import DataError, Dataset
from fairfis.fairness import BiasMetric, tree_importance
from fairfis.simulate import SimulationSpec, simulate
from fairfis.surrogate import as_labels, fidelity, fit_surrogate
from fairfis.tree import TreeConfig, fit_tree, predict


def distinct_rows_dataset(seed, n=60, p=3):
    rng = np.random.default_rng(seed)
    return Dataset.from_arrays(rng.normal(size=(n, p)), rng.integers(0, 2, n), rng.integers(0, 2, n))


def test_distinct_rows_reproduced_exactly():
    d = distinct_rows_dataset(0)
    preds = np.random.default_rng(1).integers(0, 2, d.n)
    report = fit_surrogate(d, preds)
    assert report.fidelity == 1.0
    np.testing.assert_array_equal(predict(report.tree, d.x), preds)


def test_regression_surrogate_distinct_rows():
    d = distinct_rows_dataset(2)
    preds = np.random.default_rng(3).normal(size=d.n)
    report = fit_surrogate(d, preds, task="regression")
    assert report.fidelity == 1.0


def test_duplicate_rows_with_conflicting_labels():
    x = [[0.0], [1.0], [2.0], [2.0]]
    d = Dataset.from_arrays(x, [0, 1, 0, 1], [0, 1, 0, 1])
    report = fit_surrogate(d, [0, 1, 1, 0])
    assert report.fidelity == pytest.approx(3 / 4)
    # the duplicated row's leaf is a 1-1 tie and goes to the lower label
    assert predict(report.tree, [[2.0]])[0] == 0


def test_self_distillation():
    d = simulate(SimulationSpec(n=300, seed=11))
    shallow = fit_tree(d, cfg=TreeConfig(max_depth=4))
    preds = predict(shallow, d.x)
    report = fit_surrogate(d, preds)
    assert report.fidelity == 1.0
    np.testing.assert_array_equal(predict(report.tree, d.x), preds)

    grown = fit_tree(d)
    report = fit_surrogate(d, predict(grown, d.x))
    original = tree_importance(grown)
    np.testing.assert_array_equal(report.scores.fis > 0, original.fis > 0)
    np.testing.assert_array_equal(report.scores.fairfis, original.fairfis)


def test_fidelity_examples():
    d = distinct_rows_dataset(4, n=4, p=1)
    t = fit_tree(d)
    own = predict(t, d.x)
    assert fidelity(t, d.x, own) == 1.0
    flipped = own.copy()
    flipped[:2] = 1 - flipped[:2]
    assert fidelity(t, d.x, flipped) == 0.5
    reg = Dataset.from_arrays(d.x, [0.1, 0.2, 0.3, 0.4], d.z, task="regression")
    rt = fit_tree(reg)
    assert fidelity(rt, reg.x, predict(rt, reg.x) + 1e-12) == 1.0
    assert fidelity(rt, reg.x, predict(rt, reg.x) + 1e-6) == 0.0
    with pytest.raises(ValueError, match="length mismatch"):
        fidelity(t, d.x, own[:3])


def test_length_mismatch():
    d = distinct_rows_dataset(5, n=10)
    with pytest.raises(DataError, match="predictions/dataset length mismatch"):
        fit_surrogate(d, np.zeros(9))


def test_eqop_conditions_on_original_labels():
    d = simulate(SimulationSpec(n=300, seed=12))
    preds = predict(fit_tree(d, cfg=TreeConfig(max_depth=3)), d.x)
    mutated_y = d.y.values.copy()
    flip = np.random.default_rng(0).random(d.n) < 0.3
    mutated_y[flip] = 1 - mutated_y[flip]
    mutated = Dataset.from_arrays(d.x, mutated_y, d.z)
    dp = [fit_surrogate(v, preds, metric=BiasMetric("DP")).scores.raw_fairfis for v in (d, mutated)]
    eq = [fit_surrogate(v, preds, metric=BiasMetric("EQOP")).scores.raw_fairfis for v in (d, mutated)]
    np.testing.assert_array_equal(dp[0], dp[1])
    assert not np.allclose(eq[0], eq[1])


def test_soft_predictions_threshold_with_warning(caplog):
    labels, cut = as_labels([0.2, 0.7, 0.5, 0.0])
    assert cut
    np.testing.assert_array_equal(labels, [0, 1, 1, 0])
    d = distinct_rows_dataset(6, n=20)
    soft = np.random.default_rng(0).random(d.n)
    with caplog.at_level(logging.WARNING):
        report = fit_surrogate(d, soft)
    assert report.thresholded
    assert "thresholded" in caplog.text
    with pytest.raises(DataError):
        as_labels([-0.5, 2.5])


def test_report_fields():
    d = simulate(SimulationSpec(n=200, seed=13))
    report = fit_surrogate(d, d.y.values)
    assert report.black_box_accuracy == 1.0
    assert 0.0 <= report.black_box_fairness <= 1.0
    doc = report.to_dict()
    assert doc["fidelity"] == report.fidelity
    assert len(doc["scores"]["fis"]) == d.p


def test_perfect_black_box_matches_direct_tree():
    d = simulate(SimulationSpec(n=200, seed=14))
    report = fit_surrogate(d, d.y.values)
    direct = tree_importance(fit_tree(d))
    np.testing.assert_array_equal(report.scores.fis, direct.fis)
    np.testing.assert_array_equal(report.scores.fairfis, direct.fairfis)
