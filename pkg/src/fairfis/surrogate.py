"""Global tree surrogates of black-box models.

A fully grown tree is fit to the black box's predictions on the training
rows. Group counts and outcome-label counts in each node still come from the
original ``z`` and ``y``, so EQOP conditions on the true positives.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .data import Dataset, DataError
from .fairness import BiasMetric, ImportanceScores, model_bias, tree_importance
from .tree import Tree, TreeConfig, build_tree, predict

log = logging.getLogger(__name__)

REGRESSION_TOL = 1e-9


@dataclass
class SurrogateReport:
    tree: Tree
    fidelity: float
    scores: ImportanceScores
    black_box_accuracy: float | None = None
    black_box_fairness: float | None = None
    thresholded: bool = False

    def to_dict(self) -> dict:
        return {
            "fidelity": self.fidelity,
            "black_box_accuracy": self.black_box_accuracy,
            "black_box_fairness": self.black_box_fairness,
            "probabilities_thresholded": self.thresholded,
            "node_count": self.tree.node_count,
            "scores": self.scores.to_dict(),
        }


def fidelity(t: Tree, rows, predictions) -> float:
    """Fraction of rows where the tree reproduces ``predictions``."""
    predictions = np.asarray(predictions)
    ours = predict(t, rows)
    if len(ours) != len(predictions):
        raise ValueError(f"length mismatch: {len(predictions)} predictions for {len(ours)} rows")
    if t.task == "classification":
        return float(np.mean(ours == predictions))
    return float(np.mean(np.abs(ours - predictions.astype(float)) <= REGRESSION_TOL))


def as_labels(predictions) -> tuple[np.ndarray, bool]:
    """Hard labels from a prediction vector; soft scores in [0,1] are cut at 0.5."""
    p = np.asarray(predictions, dtype=float)
    if np.all(p == np.round(p)) and p.min() >= 0:
        return p.astype(np.int64), False
    if p.min() >= 0 and p.max() <= 1:
        log.warning("non-integer predictions treated as probabilities and thresholded at 0.5")
        return (p >= 0.5).astype(np.int64), True
    raise DataError("classification predictions must be class labels or probabilities in [0, 1]")


def fit_surrogate(
    d: Dataset,
    black_box_predictions,
    task: str | None = None,
    metric: BiasMetric | None = None,
) -> SurrogateReport:
    task = task or d.task
    metric = metric or BiasMetric()
    preds = np.asarray(black_box_predictions, dtype=float)
    if len(preds) != d.n:
        raise DataError(f"predictions/dataset length mismatch: {len(preds)} vs {d.n}")
    cfg = TreeConfig(max_depth=None, min_samples_split=2, min_samples_leaf=1)
    thresholded = False
    if task == "classification":
        target, thresholded = as_labels(preds)
        labels = d.y.values.astype(np.int64) if d.y.is_classification else None
        k = max(2, int(target.max()) + 1, d.y.n_classes or 0)
        tree = build_tree(d.x, target, d.z, task=task, cfg=cfg, labels=labels, n_classes=k, n_labels=k)
        accuracy = float(np.mean(target == d.y.values)) if d.y.is_classification else None
    else:
        target = preds
        labels = d.y.values.astype(np.int64) if d.y.is_classification else None
        tree = build_tree(d.x, target, d.z, task=task, cfg=cfg, labels=labels)
        accuracy = None
    fid = fidelity(tree, d.x, target)
    scores = tree_importance(tree, metric, d.feature_names)
    fairness = None
    if d.y.is_classification or metric.kind == "DP":
        fairness = 1.0 - model_bias(target, d.y, d.z, metric)
    return SurrogateReport(tree, fid, scores, accuracy, fairness, thresholded)
