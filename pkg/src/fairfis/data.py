"""Dataset container, delimited-file ingestion and validation."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

TASKS = ("classification", "regression")


class DataError(ValueError):
    """Raised when input data cannot be turned into a valid Dataset."""


@dataclass(frozen=True)
class TargetVector:
    """Response values plus their kind: ``binary``, ``multiclass`` or ``continuous``."""

    kind: str
    values: np.ndarray
    n_classes: int | None = None

    @classmethod
    def from_values(cls, values, task: str = "classification") -> "TargetVector":
        values = np.asarray(values, dtype=float)
        if task == "regression":
            return cls("continuous", values)
        if task != "classification":
            raise ValueError(f"unknown task {task!r}")
        if values.size and (np.any(~np.isfinite(values)) or np.any(values != np.round(values))):
            raise DataError("classification target must hold integer class labels")
        if values.size and values.min() < 0:
            raise DataError("classification labels must be non-negative")
        labels = values.astype(np.int64)
        k = max(2, int(labels.max()) + 1 if labels.size else 2)
        return cls("binary" if k == 2 else "multiclass", labels, k)

    @property
    def is_classification(self) -> bool:
        return self.kind != "continuous"

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class Dataset:
    x: np.ndarray
    y: TargetVector
    z: np.ndarray
    feature_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", np.asarray(self.z).astype(np.int64))
        if not self.feature_names:
            names = tuple(f"x{j}" for j in range(x.shape[1]))
            object.__setattr__(self, "feature_names", names)
        else:
            object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @classmethod
    def from_arrays(cls, x, y, z, feature_names: Sequence[str] = (), task: str = "classification"):
        return cls(np.asarray(x, dtype=float), TargetVector.from_values(y, task), np.asarray(z), tuple(feature_names))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def task(self) -> str:
        return "classification" if self.y.is_classification else "regression"

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        y = TargetVector(self.y.kind, self.y.values[rows], self.y.n_classes)
        return Dataset(self.x[rows], y, self.z[rows], self.feature_names)


@dataclass(frozen=True)
class Violation:
    message: str
    row: int | None = None
    column: str | None = None
    severity: str = "error"

    def __str__(self) -> str:
        where = []
        if self.row is not None:
            where.append(f"row {self.row}")
        if self.column is not None:
            where.append(f"column {self.column!r}")
        loc = f" ({', '.join(where)})" if where else ""
        return f"{self.severity}: {self.message}{loc}"


def validate_dataset(d: Dataset, task: str) -> list[Violation]:
    """Check every Dataset invariant; violations are returned, never raised.

    Warnings (``severity="warning"``) flag data that is usable but degenerate,
    such as a protected attribute with a single group present.
    """
    report: list[Violation] = []
    if task not in TASKS:
        return [Violation(f"unknown task {task!r}")]
    n = d.x.shape[0]
    if d.x.ndim != 2 or d.x.shape[1] < 1:
        report.append(Violation("feature matrix must have at least one column"))
    if n < 2:
        report.append(Violation(f"need at least 2 samples, got {n}"))
    if len(d.y.values) != n or len(d.z) != n:
        report.append(Violation(f"row count mismatch: x={n}, y={len(d.y.values)}, z={len(d.z)}"))
        return report
    if len(d.feature_names) != d.x.shape[1]:
        report.append(Violation("feature_names length does not match feature count"))

    bad_rows, bad_cols = np.nonzero(~np.isfinite(d.x))
    for i, j in zip(bad_rows, bad_cols):
        col = d.feature_names[j] if j < len(d.feature_names) else str(j)
        report.append(Violation("non-finite feature value", int(i), col))

    for i in np.flatnonzero((d.z != 0) & (d.z != 1)):
        report.append(Violation("protected attribute must be 0 or 1", int(i), "z"))

    if task == "classification":
        if not d.y.is_classification:
            report.append(Violation("task is classification but target is continuous"))
        else:
            labels = d.y.values
            out = np.flatnonzero((labels < 0) | (labels >= (d.y.n_classes or 0)))
            for i in out:
                report.append(Violation("class label out of range", int(i), "y"))
            if (d.y.n_classes or 0) < 2:
                report.append(Violation("classification needs at least 2 classes"))
    else:
        if d.y.is_classification:
            report.append(Violation("task is regression but target holds class labels"))
        for i in np.flatnonzero(~np.isfinite(d.y.values.astype(float))):
            report.append(Violation("non-finite target value", int(i), "y"))

    if n and len(np.unique(d.z)) < 2:
        report.append(
            Violation(
                "degenerate protected attribute: single group present",
                column="z",
                severity="warning",
            )
        )
    return report


def errors_only(report: list[Violation]) -> list[Violation]:
    return [v for v in report if v.severity == "error"]


def _resolve_column(spec, header: list[str] | None, n_cols: int) -> int:
    if isinstance(spec, int) or (isinstance(spec, str) and header is None and spec.lstrip("-").isdigit()):
        idx = int(spec)
        if not -n_cols <= idx < n_cols:
            raise DataError(f"unknown column index {idx}")
        return idx % n_cols
    if header is None:
        raise DataError(f"column {spec!r} given by name but file has no header")
    if spec not in header:
        raise DataError(f"unknown column {spec!r}")
    return header.index(spec)


def _parse_float(cell: str, row: int, col: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise DataError(f"non-numeric value {cell!r} at row {row}, column {col!r}") from None
    if math.isnan(value) or math.isinf(value):
        raise DataError(f"missing or non-finite value at row {row}, column {col!r}")
    return value


def encode_protected(cells: Sequence[str], positive: str | None = None) -> np.ndarray:
    """Map a protected-attribute column to {0, 1}.

    With ``positive`` given, that value becomes 1 and the single other value 0.
    Without it the column must already read as 0/1.
    """
    distinct = sorted(set(cells))
    if len(distinct) > 2:
        raise DataError(f"protected attribute not binary: {len(distinct)} distinct values")
    if positive is not None:
        return np.array([1 if c == positive else 0 for c in cells], dtype=np.int64)
    try:
        values = np.array([float(c) for c in cells])
    except ValueError:
        raise DataError("protected attribute not binary: pass the positive-group value") from None
    if not np.all((values == 0) | (values == 1)):
        raise DataError("protected attribute not binary: values must be 0/1")
    return values.astype(np.int64)


def load_dataset(
    path,
    target,
    protected,
    *,
    protected_positive: str | None = None,
    features: Sequence | None = None,
    ignore: Sequence = (),
    header: bool = True,
    delimiter: str = ",",
    task: str = "classification",
) -> Dataset:
    """Read a delimited text file into a validated :class:`Dataset`.

    Columns may be named (header row) or given as integer indices. Every
    column that is neither target, protected nor ignored becomes a feature
    unless ``features`` lists them explicitly.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing file: {path}")
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh, delimiter=delimiter) if r]
    if not rows:
        raise DataError(f"empty file: {path}")
    head = None
    if header:
        head = [h.strip() for h in rows[0]]
        rows = rows[1:]
    if not rows:
        raise DataError(f"empty file: {path} has no data rows")
    n_cols = len(head) if head is not None else len(rows[0])
    for i, r in enumerate(rows):
        if len(r) != n_cols:
            raise DataError(f"row {i} has {len(r)} cells, expected {n_cols}")

    t_idx = _resolve_column(target, head, n_cols)
    z_idx = _resolve_column(protected, head, n_cols)
    skip = {_resolve_column(c, head, n_cols) for c in ignore}
    if features is not None:
        f_idx = [_resolve_column(c, head, n_cols) for c in features]
    else:
        f_idx = [j for j in range(n_cols) if j not in skip | {t_idx, z_idx}]
    if not f_idx:
        raise DataError("no feature columns selected")
    names = [head[j] if head is not None else str(j) for j in f_idx]

    x = np.empty((len(rows), len(f_idx)))
    for i, r in enumerate(rows):
        for k, j in enumerate(f_idx):
            x[i, k] = _parse_float(r[j].strip(), i, names[k])
    t_name = head[t_idx] if head is not None else str(t_idx)
    y_raw = [_parse_float(r[t_idx].strip(), i, t_name) for i, r in enumerate(rows)]
    z = encode_protected([r[z_idx].strip() for r in rows], protected_positive)

    d = Dataset(x, TargetVector.from_values(y_raw, task), z, tuple(names))
    problems = errors_only(validate_dataset(d, task))
    if problems:
        raise DataError("; ".join(str(v) for v in problems))
    return d


def write_dataset(d: Dataset, path, *, target_name: str = "y", protected_name: str = "z", delimiter: str = ",") -> None:
    """Write ``d`` so that :func:`load_dataset` reads it back bit-exactly."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow([*d.feature_names, protected_name, target_name])
        y = d.y.values
        for i in range(d.n):
            yv = str(int(y[i])) if d.y.is_classification else repr(float(y[i]))
            w.writerow([*(repr(float(v)) for v in d.x[i]), str(int(d.z[i])), yv])


def load_predictions(path, n_rows: int | None = None) -> np.ndarray:
    """Read a single-column predictions file (optional non-numeric header line)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing file: {path}")
    cells = [line.strip().split(",")[0] for line in path.read_text().splitlines() if line.strip()]
    if cells:
        try:
            float(cells[0])
        except ValueError:
            cells = cells[1:]
    if not cells:
        raise DataError(f"empty file: {path}")
    values = np.array([_parse_float(c, i, "prediction") for i, c in enumerate(cells)])
    if n_rows is not None and len(values) != n_rows:
        raise DataError(f"predictions/dataset length mismatch: {len(values)} vs {n_rows}")
    return values


def shuffle_split(d: Dataset, test_fraction: float = 0.3, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Seeded row-shuffle split into (train, test)."""
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie in (0, 1)")
    order = np.random.default_rng(seed).permutation(d.n)
    n_test = max(1, int(round(test_fraction * d.n)))
    return d.subset(np.sort(order[n_test:])), d.subset(np.sort(order[:n_test]))
