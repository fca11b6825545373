"""CART decision trees annotated with per-node group and label counts.

Every node keeps the counts needed to evaluate group bias afterwards:
samples per protected group and, when the original outcome is discrete,
outcome-label counts per group. These are recorded against the *original*
outcome even when the tree is grown on something else (black-box
predictions for surrogates, gradients for boosting).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .data import Dataset, DataError, errors_only, validate_dataset

# Minimum weighted impurity decrease (in units of w_t) for a split to count.
MIN_GAIN = 1e-12


@dataclass
class NodeStats:
    n: int
    weight: float
    group_counts: np.ndarray
    value: np.ndarray | float
    impurity: float
    class_counts: np.ndarray | None = None
    label_counts: np.ndarray | None = None

    @property
    def proba(self) -> np.ndarray:
        return np.asarray(self.value, dtype=float)

    def positives_by_group(self, positive_class: int = 1) -> np.ndarray:
        """(z=0, z=1) counts of samples whose original label is ``positive_class``."""
        if self.label_counts is None:
            raise ValueError("node carries no outcome-label counts")
        if positive_class >= self.label_counts.shape[1]:
            return np.zeros(2, dtype=np.int64)
        return self.label_counts[:, positive_class]


@dataclass
class TreeNode:
    id: int
    depth: int
    stats: NodeStats
    feature: int | None = None
    threshold: float | None = None
    left: int | None = None
    right: int | None = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


@dataclass
class Tree:
    nodes: list[TreeNode]
    task: str
    n_features: int
    n_train: int
    n_classes: int | None = None

    @property
    def loss(self) -> str:
        return "gini" if self.task == "classification" else "mse"

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def root(self) -> TreeNode:
        return self.nodes[0]

    def internal_nodes(self) -> list[TreeNode]:
        return [nd for nd in self.nodes if not nd.is_leaf]

    def leaves(self) -> list[TreeNode]:
        return [nd for nd in self.nodes if nd.is_leaf]

    @cached_property
    def parents(self) -> np.ndarray:
        parent = np.full(len(self.nodes), -1, dtype=np.int64)
        for nd in self.internal_nodes():
            parent[nd.left] = nd.id
            parent[nd.right] = nd.id
        return parent

    @cached_property
    def _arrays(self):
        feat = np.array([-1 if nd.is_leaf else nd.feature for nd in self.nodes], dtype=np.int64)
        thr = np.array([np.nan if nd.is_leaf else nd.threshold for nd in self.nodes], dtype=float)
        left = np.array([-1 if nd.is_leaf else nd.left for nd in self.nodes], dtype=np.int64)
        right = np.array([-1 if nd.is_leaf else nd.right for nd in self.nodes], dtype=np.int64)
        return feat, thr, left, right


@dataclass
class TreeConfig:
    max_depth: int | None = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    feature_subsample: int | None = None
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.feature_subsample is not None and self.feature_subsample < 1:
            raise ValueError("feature_subsample must be >= 1")


def _one_hot(labels: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros((len(labels), k))
    out[np.arange(len(labels)), labels] = 1.0
    return out


def _split_gains(xs: np.ndarray, ts: np.ndarray, classification: bool, min_leaf: int) -> np.ndarray:
    """Impurity decrease, in summed (n_t * impurity) units, for every cut position.

    ``xs`` holds each column sorted, ``ts`` the matching fit targets (one-hot
    rows for classification). Position i puts the first i+1 sorted samples left.
    """
    m = xs.shape[0]
    nl = np.arange(1, m, dtype=float)[:, None]
    nr = m - nl
    if classification:
        cum = np.cumsum(ts, axis=0)[:-1]  # (m-1, f, K)
        total = cum[-1] + ts[-1] if m > 1 else ts[0]
        right = total - cum
        score = (cum**2).sum(-1) / nl + (right**2).sum(-1) / nr
        parent = (total[0] ** 2).sum() / m
    else:
        cum = np.cumsum(ts, axis=0)[:-1]  # (m-1, f)
        total = cum[-1] + ts[-1]
        score = cum**2 / nl + (total - cum) ** 2 / nr
        parent = total[0] ** 2 / m
    gain = score - parent
    valid = (xs[1:] > xs[:-1]) & (nl >= min_leaf) & (nr >= min_leaf)
    return np.where(valid, gain, -np.inf)


def _search(x_node, t_node, features, classification, min_leaf, n_classes):
    """Best (gain, feature, threshold) over the given features; ties go to the
    lower feature index, then the lower threshold."""
    xs_raw = x_node[:, features]
    order = np.argsort(xs_raw, axis=0, kind="stable")
    xs = np.take_along_axis(xs_raw, order, axis=0)
    if classification:
        ts = _one_hot(t_node, n_classes)[order]  # (m, f, K)
    else:
        ts = (t_node - t_node.mean())[order]
    gains = _split_gains(xs, ts, classification, min_leaf)
    if gains.size == 0:
        return None
    best_per_feat = gains.max(axis=0)
    if not np.isfinite(best_per_feat).any():
        return None
    tol = 1e-12 * max(1.0, x_node.shape[0])
    top = best_per_feat.max()
    # features are evaluated in index order, so the first near-maximal wins
    cols = np.flatnonzero(best_per_feat >= top - tol)
    col = cols[np.argmin(np.asarray(features)[cols])]
    pos = int(np.flatnonzero(gains[:, col] >= best_per_feat[col] - tol)[0])
    lo, hi = xs[pos, col], xs[pos + 1, col]
    thr = (lo + hi) / 2.0
    if thr >= hi:
        thr = lo
    return float(gains[pos, col]), int(features[col]), float(thr)


def _node_stats(idx, target, z, labels, n_classes, n_labels, classification, n_total):
    n_t = len(idx)
    zi = z[idx]
    groups = np.bincount(zi, minlength=2)[:2]
    label_counts = None
    if labels is not None:
        label_counts = np.bincount(zi * n_labels + labels[idx], minlength=2 * n_labels).reshape(2, n_labels)
    if classification:
        counts = np.bincount(target[idx], minlength=n_classes)
        value = counts / n_t
        impurity = max(0.0, 1.0 - float((value**2).sum())) if counts.max() < n_t else 0.0
        return NodeStats(n_t, n_t / n_total, groups, value, impurity, counts, label_counts)
    ti = target[idx]
    if np.all(ti == ti[0]):
        value, impurity = float(ti[0]), 0.0
    else:
        value = float(ti.mean())
        impurity = float(np.mean((ti - value) ** 2))
    return NodeStats(n_t, n_t / n_total, groups, value, impurity, None, label_counts)


def build_tree(
    x: np.ndarray,
    target: np.ndarray,
    z: np.ndarray,
    *,
    task: str,
    cfg: TreeConfig | None = None,
    labels: np.ndarray | None = None,
    n_classes: int | None = None,
    n_labels: int | None = None,
) -> Tree:
    """Grow a CART tree on ``(x, target)`` while recording group counts of ``z``
    and outcome-label counts of ``labels``.

    ``labels`` defaults to ``target`` for classification. ``n_classes`` is the
    number of fit-target classes; ``n_labels`` the number of outcome labels.
    """
    cfg = cfg or TreeConfig()
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=np.int64)
    n, p = x.shape
    classification = task == "classification"
    if classification:
        target = np.asarray(target).astype(np.int64)
        n_classes = n_classes or max(2, int(target.max()) + 1)
        if labels is None:
            labels = target
    else:
        target = np.asarray(target, dtype=float)
    if labels is not None:
        labels = np.asarray(labels).astype(np.int64)
        n_labels = n_labels or max(2, int(labels.max()) + 1)
    if n < 2 * cfg.min_samples_leaf:
        raise ValueError(f"min_samples_leaf={cfg.min_samples_leaf} infeasible for n={n}")

    rng = np.random.default_rng(cfg.rng_seed)
    k_sub = cfg.feature_subsample if cfg.feature_subsample is not None else p
    k_sub = min(k_sub, p)

    def stats(idx):
        return _node_stats(idx, target, z, labels, n_classes, n_labels, classification, n)

    nodes = [TreeNode(0, 0, stats(np.arange(n)))]
    members = {0: np.arange(n)}
    stack = [0]
    while stack:
        t = stack.pop()
        node = nodes[t]
        idx = members.pop(t)
        n_t = len(idx)
        if (
            node.stats.impurity == 0.0
            or (cfg.max_depth is not None and node.depth >= cfg.max_depth)
            or n_t < cfg.min_samples_split
            or n_t < 2 * cfg.min_samples_leaf
        ):
            continue
        xn, tn = x[idx], target[idx]
        if k_sub < p:
            perm = rng.permutation(p)
            found = None
            for start in range(0, p, k_sub):
                feats = np.sort(perm[start : start + k_sub])
                found = _search(xn, tn, feats, classification, cfg.min_samples_leaf, n_classes)
                if found is not None and found[0] / n > MIN_GAIN:
                    break
                found = None
        else:
            found = _search(xn, tn, np.arange(p), classification, cfg.min_samples_leaf, n_classes)
        if found is None or found[0] / n <= MIN_GAIN:
            continue
        _, j, thr = found
        go_left = xn[:, j] <= thr
        li, ri = len(nodes), len(nodes) + 1
        node.feature, node.threshold, node.left, node.right = j, thr, li, ri
        members[li], members[ri] = idx[go_left], idx[~go_left]
        nodes.append(TreeNode(li, node.depth + 1, stats(members[li])))
        nodes.append(TreeNode(ri, node.depth + 1, stats(members[ri])))
        stack.extend([ri, li])
    return Tree(nodes, task, p, n, n_classes if classification else None)


def fit_tree(d: Dataset, task: str | None = None, cfg: TreeConfig | None = None) -> Tree:
    """Fit a CART tree (Gini for classification, MSE for regression) to ``d``."""
    task = task or d.task
    problems = errors_only(validate_dataset(d, task))
    if problems:
        raise DataError("; ".join(str(v) for v in problems))
    if task == "classification":
        return build_tree(d.x, d.y.values, d.z, task=task, cfg=cfg, n_classes=d.y.n_classes, n_labels=d.y.n_classes)
    return build_tree(d.x, d.y.values, d.z, task=task, cfg=cfg)


def _check_columns(t: Tree, x_rows) -> np.ndarray:
    x_rows = np.asarray(x_rows, dtype=float)
    if x_rows.ndim == 1:
        x_rows = x_rows.reshape(1, -1)
    if x_rows.shape[1] != t.n_features:
        raise ValueError(f"column-count mismatch: tree expects {t.n_features}, got {x_rows.shape[1]}")
    return x_rows


def apply(t: Tree, x_rows) -> np.ndarray:
    """Leaf id reached by each row (left iff x[feature] <= threshold)."""
    x_rows = _check_columns(t, x_rows)
    feat, thr, left, right = t._arrays
    node = np.zeros(len(x_rows), dtype=np.int64)
    rows = np.arange(len(x_rows))
    while True:
        active = feat[node] >= 0
        if not active.any():
            return node
        r, cur = rows[active], node[active]
        go_left = x_rows[r, feat[cur]] <= thr[cur]
        node[r] = np.where(go_left, left[cur], right[cur])


def predict(t: Tree, x_rows) -> np.ndarray:
    """Hard labels (argmax, ties to the lower class) or leaf means."""
    leaf = apply(t, x_rows)
    if t.task == "classification":
        labels = np.array([int(np.argmax(t.nodes[i].stats.value)) for i in range(t.node_count)])
        return labels[leaf]
    means = np.array([float(nd.stats.value) for nd in t.nodes])
    return means[leaf]


def predict_proba(t: Tree, x_rows) -> np.ndarray:
    if t.task != "classification":
        raise ValueError("predict_proba requires a classification tree")
    leaf = apply(t, x_rows)
    probs = np.vstack([nd.stats.proba for nd in t.nodes])
    return probs[leaf]


@dataclass
class LevelPair:
    """Sibling nodes produced by one split, i.e. the child level of ``parent_id``."""

    parent_id: int
    left_id: int
    right_id: int
    left: NodeStats
    right: NodeStats
    parent_feature: int
    parent_weight: float

    @property
    def group_counts(self) -> np.ndarray:
        return self.left.group_counts + self.right.group_counts

    @property
    def label_counts(self) -> np.ndarray | None:
        if self.left.label_counts is None:
            return None
        return self.left.label_counts + self.right.label_counts

    @property
    def n(self) -> int:
        return self.left.n + self.right.n


def collect_levels(t: Tree) -> list[LevelPair]:
    """One LevelPair per internal node, in node-id order."""
    return [
        LevelPair(nd.id, nd.left, nd.right, t.nodes[nd.left].stats, t.nodes[nd.right].stats, nd.feature, nd.stats.weight)
        for nd in t.internal_nodes()
    ]


def _arr(a):
    return None if a is None else [int(v) for v in np.asarray(a).ravel()]


def tree_to_dict(t: Tree) -> dict:
    nodes = []
    for nd in t.nodes:
        s = nd.stats
        lc = None if s.label_counts is None else [_arr(row) for row in s.label_counts]
        value = [float(v) for v in s.value] if t.task == "classification" else float(s.value)
        nodes.append(
            {
                "id": nd.id,
                "depth": nd.depth,
                "feature": nd.feature,
                "threshold": nd.threshold,
                "left": nd.left,
                "right": nd.right,
                "n": s.n,
                "weight": s.weight,
                "counts": {"groups": _arr(s.group_counts), "classes": _arr(s.class_counts), "labels_by_group": lc},
                "value": value,
                "impurity": s.impurity,
            }
        )
    return {
        "task": t.task,
        "loss": t.loss,
        "n_features": t.n_features,
        "n_train": t.n_train,
        "n_classes": t.n_classes,
        "nodes": nodes,
    }


def tree_from_dict(doc: dict) -> Tree:
    try:
        task = doc["task"]
        nodes = []
        for i, nd in enumerate(doc["nodes"]):
            if nd["id"] != i:
                raise ValueError("node ids must be 0..T-1 in order")
            c = nd["counts"]
            lc = c.get("labels_by_group")
            stats = NodeStats(
                n=int(nd["n"]),
                weight=float(nd["weight"]),
                group_counts=np.array(c["groups"], dtype=np.int64),
                value=np.array(nd["value"], dtype=float) if task == "classification" else float(nd["value"]),
                impurity=float(nd["impurity"]),
                class_counts=None if c.get("classes") is None else np.array(c["classes"], dtype=np.int64),
                label_counts=None if lc is None else np.array(lc, dtype=np.int64),
            )
            thr = nd["threshold"]
            nodes.append(
                TreeNode(
                    i, int(nd["depth"]), stats, nd["feature"], None if thr is None else float(thr), nd["left"], nd["right"]
                )
            )
        t = Tree(nodes, task, int(doc["n_features"]), int(doc["n_train"]), doc.get("n_classes"))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"corrupted tree document: {exc}") from None
    for nd in t.internal_nodes():
        if nd.left is None or nd.right is None or not (0 <= nd.feature < t.n_features) or math.isnan(nd.threshold):
            raise ValueError(f"corrupted tree document: bad split at node {nd.id}")
    return t
