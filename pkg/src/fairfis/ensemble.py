"""Random forests and gradient boosting on top of :mod:`fairfis.tree`.

Ensemble importance follows the MDI convention: each member's scores are
normalized, weight-averaged across members and renormalized.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset, DataError, errors_only, validate_dataset
from .fairness import BiasMetric, ImportanceScores, check_metric, normalize, tree_importance
from .tree import Tree, TreeConfig, build_tree, predict, tree_from_dict, tree_to_dict


@dataclass
class Ensemble:
    kind: str
    trees: list[Tree]
    tree_weights: np.ndarray
    task: str
    n_classes: int | None = None
    learning_rate: float = 1.0
    init_value: float = 0.0
    rng_seed: int = 0
    params: dict = field(default_factory=dict)
    train_loss: list[float] = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.tree_weights = np.asarray(self.tree_weights, dtype=float)
        if not self.trees:
            raise ValueError("an ensemble needs at least one tree")
        if np.any(self.tree_weights < 0) or not math.isclose(self.tree_weights.sum(), 1.0, abs_tol=1e-12):
            raise ValueError("tree weights must be nonnegative and sum to 1")

    @property
    def n_features(self) -> int:
        return self.trees[0].n_features


def _member_seeds(seed: int, count: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(count)


def _check(d: Dataset, task: str) -> None:
    problems = errors_only(validate_dataset(d, task))
    if problems:
        raise DataError("; ".join(str(v) for v in problems))


def default_max_features(task: str, p: int) -> int:
    if task == "classification":
        return max(1, int(math.sqrt(p)))
    return max(1, math.ceil(p / 3))


def fit_random_forest(
    d: Dataset,
    task: str | None = None,
    n_trees: int = 100,
    cfg: TreeConfig | None = None,
    *,
    bootstrap: bool = True,
    max_features: int | str | None = "auto",
    seed: int = 0,
    n_jobs: int = 1,
) -> Ensemble:
    """Bagged CART trees with per-split feature subsampling.

    ``max_features="auto"`` uses floor(sqrt(p)) for classification and
    ceil(p/3) for regression; ``None`` disables subsampling. Member seeds are
    spawned from ``seed`` by member index, so results do not depend on
    ``n_jobs``.
    """
    task = task or d.task
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    _check(d, task)
    cfg = cfg or TreeConfig()
    if max_features == "auto":
        k = default_max_features(task, d.p)
    else:
        k = max_features
    classification = task == "classification"

    def fit_member(ss: np.random.SeedSequence) -> Tree:
        boot_seed, tree_seed = ss.generate_state(2, dtype=np.uint64)
        if bootstrap:
            rows = np.random.default_rng(int(boot_seed)).integers(0, d.n, size=d.n)
        else:
            rows = np.arange(d.n)
        member_cfg = replace(cfg, feature_subsample=k, rng_seed=int(tree_seed))
        if classification:
            return build_tree(
                d.x[rows], d.y.values[rows], d.z[rows], task=task, cfg=member_cfg,
                n_classes=d.y.n_classes, n_labels=d.y.n_classes,
            )
        return build_tree(d.x[rows], d.y.values[rows], d.z[rows], task=task, cfg=member_cfg)

    seeds = _member_seeds(seed, n_trees)
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = list(pool.map(fit_member, seeds))
    else:
        trees = [fit_member(s) for s in seeds]
    params = {"n_trees": n_trees, "bootstrap": bootstrap, "max_features": k, **_cfg_params(cfg)}
    return Ensemble(
        "random_forest", trees, np.full(n_trees, 1.0 / n_trees), task,
        n_classes=d.y.n_classes if classification else None, rng_seed=seed, params=params,
    )


def _sigmoid(f):
    return 1.0 / (1.0 + np.exp(-f))


def _log_loss(y, f) -> float:
    # log(1 + e^f) - y f, computed stably
    return float(np.mean(np.logaddexp(0.0, f) - y * f))


def fit_gradient_boosting(
    d: Dataset,
    task: str | None = None,
    n_stages: int = 100,
    learning_rate: float = 0.1,
    cfg: TreeConfig | None = None,
    *,
    seed: int = 0,
) -> Ensemble:
    """Stagewise least-squares boosting of regression trees.

    Regression fits residuals from a mean initialisation. Binary
    classification fits the negative gradient ``y - sigmoid(F)`` of the
    logistic loss from a log-odds initialisation. Member trees record group
    and original-label counts so they can be scored for bias.
    """
    task = task or d.task
    if n_stages < 1:
        raise ValueError("n_stages must be >= 1")
    _check(d, task)
    if task == "classification" and (d.y.n_classes or 0) > 2:
        raise ValueError("gradient boosting supports binary classification or regression only")
    cfg = cfg or TreeConfig(max_depth=3)
    y = d.y.values.astype(float)
    if task == "classification":
        rate = float(np.clip(y.mean(), 1e-12, 1 - 1e-12))
        init = math.log(rate / (1 - rate))
    else:
        init = float(y.mean())
    score = np.full(d.n, init)
    labels = d.y.values if task == "classification" else None
    losses = [_log_loss(y, score) if labels is not None else float(np.mean((y - score) ** 2))]
    trees = []
    for k, ss in enumerate(_member_seeds(seed, n_stages)):
        grad = y - _sigmoid(score) if labels is not None else y - score
        stage_cfg = replace(cfg, rng_seed=int(ss.generate_state(1, dtype=np.uint64)[0]))
        tree = build_tree(d.x, grad, d.z, task="regression", cfg=stage_cfg, labels=labels, n_labels=2 if labels is not None else None)
        trees.append(tree)
        score = score + learning_rate * predict(tree, d.x)
        losses.append(_log_loss(y, score) if labels is not None else float(np.mean((y - score) ** 2)))
    params = {"n_stages": n_stages, **_cfg_params(cfg)}
    e = Ensemble(
        "gradient_boosting", trees, np.full(n_stages, 1.0 / n_stages), task,
        n_classes=2 if task == "classification" else None, learning_rate=learning_rate,
        init_value=init, rng_seed=seed, params=params,
    )
    e.train_loss = losses
    return e


def _cfg_params(cfg: TreeConfig) -> dict:
    return {
        "max_depth": cfg.max_depth,
        "min_samples_split": cfg.min_samples_split,
        "min_samples_leaf": cfg.min_samples_leaf,
    }


def decision_function(e: Ensemble, rows) -> np.ndarray:
    """Additive boosting score ``init + lr * sum(tree outputs)``."""
    if e.kind != "gradient_boosting":
        raise ValueError("decision_function is defined for gradient boosting only")
    out = np.full(np.asarray(rows).reshape(len(rows), -1).shape[0], e.init_value, dtype=float)
    for t in e.trees:
        out += e.learning_rate * predict(t, rows)
    return out


def predict_ensemble(e: Ensemble, rows) -> np.ndarray:
    rows = np.asarray(rows, dtype=float)
    if rows.ndim == 1:
        rows = rows.reshape(1, -1)
    if rows.shape[1] != e.n_features:
        raise ValueError(f"column-count mismatch: model expects {e.n_features}, got {rows.shape[1]}")
    if e.kind == "gradient_boosting":
        score = decision_function(e, rows)
        if e.task == "classification":
            return (_sigmoid(score) > 0.5).astype(np.int64)
        return score
    preds = np.vstack([predict(t, rows) for t in e.trees])
    if e.task == "classification":
        k = e.n_classes or int(preds.max()) + 1
        votes = np.zeros((rows.shape[0], k))
        for w, row in zip(e.tree_weights, preds):
            votes[np.arange(rows.shape[0]), row.astype(np.int64)] += w
        return np.argmax(votes, axis=1)
    return e.tree_weights @ preds


def aggregate_importance(e: Ensemble, metric: BiasMetric | None = None, feature_names=None) -> ImportanceScores:
    metric = metric or BiasMetric()
    for t in e.trees:
        check_metric(t, metric)
    per_tree = [tree_importance(t, metric) for t in e.trees]
    names = tuple(feature_names) if feature_names is not None else None
    if len(per_tree) == 1:
        # renormalizing an already normalized vector can move the last bit
        return replace(per_tree[0], feature_names=names)
    fis = sum(w * s.fis for w, s in zip(e.tree_weights, per_tree))
    fair = sum(w * s.fairfis for w, s in zip(e.tree_weights, per_tree))
    return normalize(ImportanceScores(np.asarray(fis), np.asarray(fair), metric, feature_names=names))


def model_to_dict(model: Tree | Ensemble, feature_names=None) -> dict:
    """JSON envelope ``{kind, params, trees}`` shared by single trees and ensembles."""
    names = list(feature_names) if feature_names is not None else None
    if isinstance(model, Tree):
        return {"kind": "tree", "params": {"task": model.task}, "feature_names": names, "tree_weights": [1.0],
                "trees": [tree_to_dict(model)]}
    params = {
        "task": model.task,
        "n_classes": model.n_classes,
        "learning_rate": model.learning_rate,
        "init_value": model.init_value,
        "rng_seed": model.rng_seed,
        **model.params,
    }
    return {
        "kind": model.kind,
        "params": params,
        "feature_names": names,
        "tree_weights": [float(w) for w in model.tree_weights],
        "trees": [tree_to_dict(t) for t in model.trees],
    }


def model_from_dict(doc: dict) -> Tree | Ensemble:
    try:
        kind = doc["kind"]
        trees = [tree_from_dict(t) for t in doc["trees"]]
        params = dict(doc["params"])
    except (KeyError, TypeError) as exc:
        raise ValueError(f"corrupted model document: {exc}") from None
    if kind == "tree":
        if len(trees) != 1:
            raise ValueError("corrupted model document: tree model must hold one tree")
        return trees[0]
    if kind not in ("random_forest", "gradient_boosting"):
        raise ValueError(f"corrupted model document: unknown kind {kind!r}")
    task = params.pop("task")
    n_classes = params.pop("n_classes", None)
    lr = params.pop("learning_rate", 1.0)
    init = params.pop("init_value", 0.0)
    seed = params.pop("rng_seed", 0)
    return Ensemble(kind, trees, np.array(doc["tree_weights"]), task, n_classes, lr, init, seed, params)


def model_importance(model: Tree | Ensemble, metric: BiasMetric | None = None, feature_names=None) -> ImportanceScores:
    if isinstance(model, Tree):
        return tree_importance(model, metric, feature_names)
    return aggregate_importance(model, metric, feature_names)


def model_predict(model: Tree | Ensemble, rows) -> np.ndarray:
    if isinstance(model, Tree):
        return predict(model, rows)
    return predict_ensemble(model, rows)
