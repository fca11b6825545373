"""Synthetic fairness benchmarks with known biased and signal features.

Features come in four equal blocks: G1 and G2 are shifted by ``alpha`` for
the protected group (biased), G1 and G3 carry the signal ``beta`` (useful),
G4 is pure noise.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from .data import Dataset, TargetVector
from .ensemble import aggregate_importance, fit_gradient_boosting, fit_random_forest
from .fairness import BiasMetric, tree_importance
from .tree import TreeConfig, fit_tree

SCENARIOS = ("linear", "additive_sin", "interactions")
GROUPS = ("G1", "G2", "G3", "G4")


@dataclass
class SimulationSpec:
    scenario: str = "linear"
    task: str = "classification"
    n: int = 1000
    p: int = 12
    pi_z: float = 0.2
    alpha: float | None = None
    beta: float | None = None
    beta0: float = 0.0
    gamma: float = 1.0
    sigma: str = "identity"
    rho: float = 0.5
    group_size: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.task not in ("classification", "regression"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.alpha is None:
            self.alpha = 2.0 if self.task == "classification" else 0.4
        if self.beta is None:
            self.beta = 1.0 if self.task == "classification" else 3.0
        if not 0 < self.pi_z < 1:
            raise ValueError("pi_z must lie in (0, 1)")
        if self.sigma not in ("identity", "ar_precision"):
            raise ValueError(f"unknown sigma spec {self.sigma!r}")
        if self.group_size is None:
            if self.p % 4 != 0 or self.p < 4:
                raise ValueError("p must be a positive multiple of 4")
        elif self.group_size < 1 or 4 * self.group_size > self.p:
            raise ValueError("group_size too large for p")
        if self.n < 2:
            raise ValueError("n must be >= 2")

    def groups(self) -> list[np.ndarray]:
        """Column indices of G1..G4 as contiguous blocks; G4 absorbs any excess."""
        size = self.group_size or self.p // 4
        bounds = [0, size, 2 * size, 3 * size, self.p]
        return [np.arange(bounds[g], bounds[g + 1]) for g in range(4)]

    def group_labels(self) -> list[str]:
        labels = [""] * self.p
        for name, cols in zip(GROUPS, self.groups()):
            for j in cols:
                labels[j] = name
        return labels

    def alpha_vector(self) -> np.ndarray:
        a = np.zeros(self.p)
        g = self.groups()
        a[np.concatenate([g[0], g[1]])] = self.alpha
        return a

    def beta_vector(self) -> np.ndarray:
        b = np.zeros(self.p)
        g = self.groups()
        b[np.concatenate([g[0], g[2]])] = self.beta
        return b

    def interaction_pairs(self) -> list[tuple[int, int]]:
        """Unordered distinct pairs among the first two features of every group."""
        lead = sorted(int(j) for cols in self.groups() for j in cols[:2])
        return list(combinations(lead, 2))

    def feature_names(self) -> tuple[str, ...]:
        return tuple(f"x{j}" for j in range(self.p))

    def to_dict(self) -> dict:
        return asdict(self)


def large_p_spec(**overrides) -> SimulationSpec:
    """p = 250 with five features in each of G1..G3 and the rest noise."""
    kw = {"p": 250, "group_size": 5, **overrides}
    return SimulationSpec(**kw)


def ar_precision(p: int, rho: float = 0.5) -> np.ndarray:
    q = np.eye(p)
    idx = np.arange(p - 1)
    q[idx, idx + 1] = rho
    q[idx + 1, idx] = rho
    return q


def covariance(spec: SimulationSpec) -> np.ndarray:
    if spec.sigma == "identity":
        return np.eye(spec.p)
    q = ar_precision(spec.p, spec.rho)
    assert np.linalg.eigvalsh(q).min() > 0, "precision matrix must be positive definite"
    return np.linalg.inv(q)


def _rngs(spec: SimulationSpec) -> tuple[np.random.Generator, np.random.Generator]:
    design, response = np.random.SeedSequence(spec.seed).spawn(2)
    return np.random.default_rng(design), np.random.default_rng(response)


def gen_design(spec: SimulationSpec) -> tuple[np.ndarray, np.ndarray]:
    """z ~ Bernoulli(pi_z); x_i ~ N(alpha * z_i, Sigma)."""
    rng, _ = _rngs(spec)
    z = (rng.random(spec.n) < spec.pi_z).astype(np.int64)
    noise = rng.standard_normal((spec.n, spec.p))
    if spec.sigma == "ar_precision":
        q = ar_precision(spec.p, spec.rho)
        if np.linalg.eigvalsh(q).min() <= 0:
            raise ValueError("precision matrix is not positive definite")
        # Q = L L^T; solving L^T u = e gives cov(u) = Q^{-1}
        chol = np.linalg.cholesky(q)
        noise = np.linalg.solve(chol.T, noise.T).T
    x = noise + np.outer(z, spec.alpha_vector())
    return x, z


def scenario_f(spec: SimulationSpec, x) -> np.ndarray | float:
    """Mean function of the chosen scenario for one row or a matrix of rows."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xm = x.reshape(1, -1) if single else x
    if xm.shape[1] != spec.p:
        raise ValueError(f"row length {xm.shape[1]} does not match p={spec.p}")
    b = spec.beta_vector()
    if spec.scenario == "additive_sin":
        f = spec.beta0 + np.sin(xm) @ b
    else:
        f = spec.beta0 + xm @ b
    if spec.scenario == "interactions":
        for l, k in spec.interaction_pairs():
            f = f + spec.gamma * np.sin(xm[:, l] * xm[:, k])
    return float(f[0]) if single else f


def gen_response(spec: SimulationSpec, f_values) -> TargetVector:
    """Gaussian noise for regression; Bernoulli(sigmoid(f)) labels for classification."""
    _, rng = _rngs(spec)
    f = np.asarray(f_values, dtype=float)
    if spec.task == "regression":
        return TargetVector("continuous", f + rng.standard_normal(len(f)))
    prob = 1.0 / (1.0 + np.exp(-f))
    y = (rng.random(len(f)) < prob).astype(np.int64)
    return TargetVector("binary", y, 2)


def simulate(spec: SimulationSpec) -> Dataset:
    x, z = gen_design(spec)
    y = gen_response(spec, scenario_f(spec, x))
    return Dataset(x, y, z, spec.feature_names())


def write_sidecar(spec: SimulationSpec, path) -> None:
    Path(path).write_text(json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n")


def replicate_seeds(seed: int, n_reps: int) -> list[tuple[int, int]]:
    """(data seed, model seed) for each replicate, spawned from ``seed``."""
    out = []
    for ss in np.random.SeedSequence(seed).spawn(n_reps):
        a, b = ss.generate_state(2, dtype=np.uint64)
        out.append((int(a), int(b)))
    return out


@dataclass
class ReplicateSummary:
    feature_names: tuple[str, ...]
    groups: list[str]
    fis: np.ndarray
    fairfis: np.ndarray
    metric: BiasMetric
    model: str
    extra: dict = field(default_factory=dict)

    @staticmethod
    def _mean(a: np.ndarray) -> np.ndarray:
        return np.array([math.fsum(col) / len(col) for col in a.T])

    @property
    def mean_fis(self) -> np.ndarray:
        return self._mean(self.fis)

    @property
    def mean_fairfis(self) -> np.ndarray:
        return self._mean(self.fairfis)

    @property
    def sd_fis(self) -> np.ndarray:
        return self.fis.std(axis=0, ddof=1) if len(self.fis) > 1 else np.zeros(self.fis.shape[1])

    @property
    def sd_fairfis(self) -> np.ndarray:
        return self.fairfis.std(axis=0, ddof=1) if len(self.fairfis) > 1 else np.zeros(self.fairfis.shape[1])

    def group_means(self) -> dict[str, dict[str, float]]:
        """Mean (over member features) of the replicate-averaged scores, per group."""
        out = {}
        labels = np.array(self.groups)
        for g in GROUPS:
            cols = np.flatnonzero(labels == g)
            if cols.size:
                out[g] = {
                    "fis": math.fsum(self.mean_fis[cols]) / cols.size,
                    "fairfis": math.fsum(self.mean_fairfis[cols]) / cols.size,
                }
        return out

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["feature", "group", "mean_fis", "sd_fis", "mean_fairfis", "sd_fairfis"])
            cols = (self.mean_fis, self.sd_fis, self.mean_fairfis, self.sd_fairfis)
            for j, name in enumerate(self.feature_names):
                w.writerow([name, self.groups[j], *(repr(float(c[j])) for c in cols)])


def fit_and_score(d: Dataset, model: str, metric: BiasMetric, model_seed: int, *, tree_cfg=None,
                  n_trees: int = 100, n_stages: int = 100, learning_rate: float = 0.1):
    if model == "tree":
        cfg = tree_cfg or TreeConfig()
        return tree_importance(fit_tree(d, cfg=TreeConfig(**{**asdict(cfg), "rng_seed": model_seed})), metric)
    if model == "forest":
        return aggregate_importance(fit_random_forest(d, n_trees=n_trees, cfg=tree_cfg, seed=model_seed), metric)
    if model == "boosting":
        cfg = tree_cfg or TreeConfig(max_depth=3)
        e = fit_gradient_boosting(d, n_stages=n_stages, learning_rate=learning_rate, cfg=cfg, seed=model_seed)
        return aggregate_importance(e, metric)
    raise ValueError(f"unknown model {model!r}")


def run_replicates(
    spec: SimulationSpec,
    model: str = "tree",
    metric: BiasMetric | None = None,
    n_reps: int = 10,
    *,
    tree_cfg: TreeConfig | None = None,
    n_trees: int = 100,
    n_stages: int = 100,
    learning_rate: float = 0.1,
    n_jobs: int = 1,
) -> ReplicateSummary:
    """Refit ``model`` on ``n_reps`` fresh draws of ``spec`` and collect scores.

    Replicate seeds derive from ``spec.seed``; the summary does not depend on
    ``n_jobs``.
    """
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    metric = metric or BiasMetric()

    def one(seeds):
        data_seed, model_seed = seeds
        d = simulate(SimulationSpec(**{**asdict(spec), "seed": data_seed}))
        s = fit_and_score(d, model, metric, model_seed, tree_cfg=tree_cfg,
                          n_trees=n_trees, n_stages=n_stages, learning_rate=learning_rate)
        return s.fis, s.fairfis

    seeds = replicate_seeds(spec.seed, n_reps)
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(one, seeds))
    else:
        results = [one(s) for s in seeds]
    fis = np.vstack([r[0] for r in results])
    fair = np.vstack([r[1] for r in results])
    return ReplicateSummary(spec.feature_names(), spec.group_labels(), fis, fair, metric, model)
