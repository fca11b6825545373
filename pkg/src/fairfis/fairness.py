"""Accuracy- and fairness-based feature importance for trees.

The accuracy score is the usual mean decrease in impurity. The fairness
score replaces impurity with group bias measured over *levels*: the bias of
the sibling pair that contains node t minus the bias of the pair created by
t's own split, weighted by w_t. Classification levels are evaluated as
probabilistic trees, so each sample's prediction is a Bernoulli (or
categorical) draw with its node's class proportions and the bias has a
closed form in node counts.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .tree import LevelPair, Tree, collect_levels

__all__ = [
    "BiasMetric",
    "ImportanceScores",
    "LevelPair",
    "MetricError",
    "NodeContribution",
    "fairfis_raw",
    "fis_raw",
    "impurity",
    "level_bias",
    "level_bias_dp_classification",
    "level_bias_dp_multiclass",
    "level_bias_dp_regression",
    "level_bias_eqop_classification",
    "level_bias_eqop_regression",
    "model_bias",
    "normalize",
    "tree_importance",
]


class MetricError(ValueError):
    """Bias metric incompatible with the task (e.g. EQOP on a regression target)."""


@dataclass(frozen=True)
class BiasMetric:
    kind: str = "DP"
    positive_class: int = 1
    multiclass_reduction: str = "l1"

    def __post_init__(self):
        kind = self.kind.upper()
        if kind not in ("DP", "EQOP"):
            raise ValueError(f"unknown bias metric {self.kind!r}")
        if self.multiclass_reduction not in ("l1", "max"):
            raise ValueError("multiclass_reduction must be 'l1' or 'max'")
        object.__setattr__(self, "kind", kind)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "positive_class": self.positive_class, "multiclass_reduction": self.multiclass_reduction}


def impurity(counts_or_values, loss_kind: str) -> float:
    """Gini index of class counts, or mean squared deviation of values."""
    a = np.asarray(counts_or_values, dtype=float)
    if loss_kind == "gini":
        total = a.sum()
        if a.size == 0 or total <= 0:
            raise ValueError("impurity of an empty node")
        return float(1.0 - ((a / total) ** 2).sum())
    if loss_kind == "mse":
        if a.size == 0:
            raise ValueError("impurity of an empty node")
        return float(np.mean((a - a.mean()) ** 2))
    raise ValueError(f"unknown loss kind {loss_kind!r}")


def fis_raw(t: Tree) -> np.ndarray:
    """Mean decrease in impurity per feature (unnormalized)."""
    out = np.zeros(t.n_features)
    for nd in t.internal_nodes():
        l, r = t.nodes[nd.left].stats, t.nodes[nd.right].stats
        out[nd.feature] += nd.stats.weight * nd.stats.impurity - l.weight * l.impurity - r.weight * r.impurity
    return out


def _membership_gap(left: np.ndarray, right: np.ndarray) -> float | None:
    """Share of group 1 routed left minus share of group 0 routed left.

    ``left``/``right`` are (z=0, z=1) counts. None when a group is absent.
    """
    tot = left + right
    if tot[0] == 0 or tot[1] == 0:
        return None
    return left[1] / tot[1] - left[0] / tot[0]


def _bilinear(v_left, v_right, gap: float):
    # pi_l*(A_l - B_l) + pi_r*(A_r - B_r) with A_r - B_r = -(A_l - B_l);
    # the factored form makes equal node values cancel exactly.
    return (np.asarray(v_left, dtype=float) - np.asarray(v_right, dtype=float)) * gap


def level_bias_dp_classification(pair: LevelPair, positive_class: int = 1) -> float:
    gap = _membership_gap(pair.left.group_counts, pair.right.group_counts)
    if gap is None:
        return 0.0
    return float(abs(_bilinear(pair.left.proba[positive_class], pair.right.proba[positive_class], gap)))


def level_bias_eqop_classification(pair: LevelPair, positive_class: int = 1) -> float:
    gap = _membership_gap(pair.left.positives_by_group(positive_class), pair.right.positives_by_group(positive_class))
    if gap is None:
        return 0.0
    return float(abs(_bilinear(pair.left.proba[positive_class], pair.right.proba[positive_class], gap)))


def level_bias_dp_regression(pair: LevelPair) -> float:
    gap = _membership_gap(pair.left.group_counts, pair.right.group_counts)
    if gap is None:
        return 0.0
    return float(abs(_bilinear(pair.left.value, pair.right.value, gap)))


def level_bias_eqop_regression(pair: LevelPair, positive_class: int = 1) -> float:
    """Mean-difference bias over samples whose original label is ``positive_class``.

    Used for trees grown on gradients (boosting classifiers), whose node
    values are not probabilities.
    """
    gap = _membership_gap(pair.left.positives_by_group(positive_class), pair.right.positives_by_group(positive_class))
    if gap is None:
        return 0.0
    return float(abs(_bilinear(pair.left.value, pair.right.value, gap)))


def level_bias_dp_multiclass(pair: LevelPair, reduction: str = "l1") -> float:
    gap = _membership_gap(pair.left.group_counts, pair.right.group_counts)
    if gap is None:
        return 0.0
    v = np.abs(_bilinear(pair.left.proba, pair.right.proba, gap))
    return float(v.sum() if reduction == "l1" else v.max())


def _population(pair: LevelPair, metric: BiasMetric) -> tuple[np.ndarray, np.ndarray]:
    if metric.kind == "EQOP":
        return pair.left.positives_by_group(metric.positive_class), pair.right.positives_by_group(metric.positive_class)
    return pair.left.group_counts, pair.right.group_counts


def is_degenerate(pair: LevelPair, metric: BiasMetric) -> bool:
    """True when the level lacks one protected group (or, for EQOP, its positives)."""
    left, right = _population(pair, metric)
    tot = left + right
    return bool(tot[0] == 0 or tot[1] == 0)


def check_metric(t: Tree, metric: BiasMetric) -> None:
    if metric.kind != "EQOP":
        return
    lc = t.root.stats.label_counts
    if lc is None:
        raise MetricError("EQOP requires classification")


def level_bias(pair: LevelPair, metric: BiasMetric, task: str, n_classes: int | None = None) -> tuple[float, bool]:
    """Bias of one level under ``metric`` plus its degeneracy flag."""
    degenerate = is_degenerate(pair, metric)
    if degenerate:
        return 0.0, True
    k = metric.positive_class
    if task == "regression":
        if metric.kind == "EQOP":
            return level_bias_eqop_regression(pair, k), False
        return level_bias_dp_regression(pair), False
    if metric.kind == "EQOP":
        return level_bias_eqop_classification(pair, k), False
    if (n_classes or len(pair.left.proba)) > 2:
        return level_bias_dp_multiclass(pair, metric.multiclass_reduction), False
    return level_bias_dp_classification(pair, k), False


@dataclass(frozen=True)
class NodeContribution:
    node_id: int
    feature: int
    weight: float
    level_bias: float
    child_bias: float
    level_degenerate: bool
    child_degenerate: bool

    @property
    def contribution(self) -> float:
        return self.weight * (self.level_bias - self.child_bias)

    def to_dict(self) -> dict:
        return {
            "node": self.node_id,
            "feature": self.feature,
            "weight": self.weight,
            "level_bias": self.level_bias,
            "child_bias": self.child_bias,
            "level_degenerate": self.level_degenerate,
            "child_degenerate": self.child_degenerate,
        }


def node_contributions(t: Tree, metric: BiasMetric) -> list[NodeContribution]:
    check_metric(t, metric)
    levels = collect_levels(t)
    bias = {pair.parent_id: level_bias(pair, metric, t.task, t.n_classes) for pair in levels}
    parents = t.parents
    out = []
    for pair in levels:
        t_id = pair.parent_id
        child, child_deg = bias[t_id]
        if t_id == 0:
            incoming, in_deg = 0.0, False  # constant model at the root
        else:
            incoming, in_deg = bias[int(parents[t_id])]
        out.append(NodeContribution(t_id, pair.parent_feature, pair.parent_weight, incoming, child, in_deg, child_deg))
    return out


def fairfis_raw(t: Tree, metric: BiasMetric | None = None) -> np.ndarray:
    """Weighted decrease in level bias per feature (signed, unnormalized)."""
    metric = metric or BiasMetric()
    out = np.zeros(t.n_features)
    for c in node_contributions(t, metric):
        out[c.feature] += c.contribution
    return out


@dataclass
class ImportanceScores:
    raw_fis: np.ndarray
    raw_fairfis: np.ndarray
    metric: BiasMetric
    fis: np.ndarray | None = None
    fairfis: np.ndarray | None = None
    feature_names: tuple[str, ...] | None = None
    contributions: list[NodeContribution] | None = field(default=None, repr=False)

    @property
    def degenerate_nodes(self) -> list[int]:
        if not self.contributions:
            return []
        return [c.node_id for c in self.contributions if c.level_degenerate or c.child_degenerate]

    def names(self) -> list[str]:
        if self.feature_names:
            return list(self.feature_names)
        return [f"x{j}" for j in range(len(self.raw_fis))]

    def to_dict(self) -> dict:
        doc = {
            "metric": self.metric.to_dict(),
            "features": self.names(),
            "fis": [float(v) for v in self.fis],
            "fairfis": [float(v) for v in self.fairfis],
            "raw_fis": [float(v) for v in self.raw_fis],
            "raw_fairfis": [float(v) for v in self.raw_fairfis],
            "degenerate_nodes": self.degenerate_nodes,
        }
        if self.contributions is not None:
            doc["nodes"] = [c.to_dict() for c in self.contributions]
        return doc


def _scaled(v: np.ndarray, total: float) -> np.ndarray:
    return v / total if total > 0 else np.zeros_like(v)


def normalize(scores: ImportanceScores) -> ImportanceScores:
    """FIS scaled to sum 1; FairFIS scaled so its absolute values sum to 1."""
    raw_fis = np.asarray(scores.raw_fis, dtype=float)
    raw_fair = np.asarray(scores.raw_fairfis, dtype=float)
    return replace(
        scores,
        fis=_scaled(raw_fis, float(raw_fis.sum())),
        fairfis=_scaled(raw_fair, float(np.abs(raw_fair).sum())),
    )


def tree_importance(
    t: Tree, metric: BiasMetric | None = None, feature_names: Sequence[str] | None = None
) -> ImportanceScores:
    """Both scores for a single tree, normalized, with the per-node audit trail."""
    metric = metric or BiasMetric()
    contribs = node_contributions(t, metric)
    raw_fair = np.zeros(t.n_features)
    for c in contribs:
        raw_fair[c.feature] += c.contribution
    names = tuple(feature_names) if feature_names is not None else None
    return normalize(ImportanceScores(fis_raw(t), raw_fair, metric, feature_names=names, contributions=contribs))


def model_bias(predictions, y, z, metric: BiasMetric | None = None) -> float:
    """Bias of final hard predictions; overall fairness is ``1 - model_bias``.

    Class-label predictions are reduced to the indicator of
    ``metric.positive_class``; continuous predictions are used as they are.
    """
    metric = metric or BiasMetric()
    pred = np.asarray(predictions, dtype=float)
    y_vals = np.asarray(getattr(y, "values", y), dtype=float)
    z = np.asarray(z)
    if not (len(pred) == len(y_vals) == len(z)):
        raise ValueError(f"length mismatch: predictions={len(pred)}, y={len(y_vals)}, z={len(z)}")
    continuous = getattr(y, "kind", None) == "continuous"
    if metric.kind == "EQOP":
        if continuous:
            raise MetricError("EQOP requires classification")
        keep = y_vals == metric.positive_class
        pred, z = pred[keep], z[keep]
    if not continuous:
        pred = (pred == metric.positive_class).astype(float)
    g1, g0 = pred[z == 1], pred[z == 0]
    if len(g1) == 0 or len(g0) == 0:
        return 0.0
    return float(abs(g1.mean() - g0.mean()))


def write_scores_csv(scores: ImportanceScores, path, groups: Sequence[str] | None = None) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", "group", "fis", "fairfis"] if groups is not None else ["feature", "fis", "fairfis"])
        for j, name in enumerate(scores.names()):
            row = [name] + ([groups[j]] if groups is not None else [])
            w.writerow(row + [repr(float(scores.fis[j])), repr(float(scores.fairfis[j]))])


def write_scores_json(scores: ImportanceScores, path) -> None:
    Path(path).write_text(json.dumps(scores.to_dict(), indent=2) + "\n")
