"""Feature matrices, imputation, standardization and stratified splitting."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import ClassTooSmall, DimensionMismatch, SchemaMismatch
from ..features import format_value
from ..labels import CallLabel

CORE_COLUMNS = ("f0_mean", "amplitude_db", "duration_s")
STD_FLOOR = 1e-12


@dataclass(frozen=True)
class FeatureMatrix:
    rows: np.ndarray
    labels: np.ndarray
    columns: tuple
    medians: np.ndarray
    ids: tuple = ()
    standardized: bool = False

    def __post_init__(self):
        rows = np.atleast_2d(np.asarray(self.rows, dtype=np.float64))
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if rows.shape[0] != labels.shape[0]:
            raise DimensionMismatch(f"{rows.shape[0]} rows but {labels.shape[0]} labels")
        if rows.shape[0] and rows.shape[1] != len(self.columns):
            raise DimensionMismatch(f"{rows.shape[1]} values per row but {len(self.columns)} columns")
        if not np.all(np.isfinite(rows)):
            raise ValueError("feature matrix contains non-finite values")
        if np.any((labels != 0) & (labels != 1)):
            raise ValueError("labels must be 0 or 1")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "medians", np.asarray(self.medians, dtype=np.float64))
        object.__setattr__(self, "ids", tuple(self.ids))

    def __len__(self):
        return self.rows.shape[0]

    @property
    def n_features(self) -> int:
        return len(self.columns)

    def take(self, index) -> "FeatureMatrix":
        index = np.asarray(index, dtype=np.int64)
        ids = tuple(self.ids[i] for i in index) if self.ids else ()
        return replace(self, rows=self.rows[index], labels=self.labels[index], ids=ids)

    def class_counts(self) -> tuple:
        n1 = int(np.sum(self.labels))
        return len(self) - n1, n1


def record_key(source_id, start_s) -> str:
    """Identifier joining a feature row to its MFCC sequence."""
    return f"{source_id}@{format_value(float(start_s))}"


def _cell(value) -> float:
    if value is None or value == "":
        return np.nan
    return float(value)


def impute_medians(raw: np.ndarray) -> np.ndarray:
    """Per-column median of finite values; 0 for a column with none."""
    med = np.zeros(raw.shape[1])
    for j in range(raw.shape[1]):
        col = raw[:, j]
        col = col[np.isfinite(col)]
        if col.size:
            med[j] = float(np.median(col))
    return med


def matrix_from_records(records, columns=CORE_COLUMNS, medians=None,
                        require_labels: bool = True) -> FeatureMatrix:
    """Build a FeatureMatrix from feature-CSV records (dicts).

    Missing cells are filled with ``medians`` (computed from these records when
    not given). Rows without a label get label 0 unless ``require_labels``.
    """
    columns = tuple(columns)
    records = list(records)
    for c in columns:
        if records and c not in records[0]:
            raise SchemaMismatch(f"column {c!r} missing from input")
    raw = np.array([[_cell(r.get(c)) for c in columns] for r in records],
                   dtype=np.float64).reshape(len(records), len(columns))
    med = impute_medians(raw) if medians is None else np.asarray(medians, dtype=np.float64)
    if med.shape != (len(columns),):
        raise DimensionMismatch("imputation medians do not match the column count")
    rows = np.where(np.isfinite(raw), raw, med[None, :])
    labels = []
    for r in records:
        lab = r.get("label")
        if lab in (None, ""):
            if require_labels:
                raise SchemaMismatch("record without a label")
            labels.append(0)
        else:
            labels.append(CallLabel.parse(lab).as_int)
    ids = tuple(record_key(r.get("source_id", ""), r.get("start_s", 0.0)) for r in records)
    return FeatureMatrix(rows, np.array(labels, dtype=np.int64), columns, med, ids)


def split_indices(labels, test_fraction: float, seed: int):
    """Stratified ``(train_index, test_index)``, both sorted ascending."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in (0, 1):
        idx = np.flatnonzero(labels == c)
        if idx.size == 0:
            continue
        if idx.size < 2:
            raise ClassTooSmall(f"class {c} has {idx.size} row(s); need at least 2")
        k = int(round(test_fraction * idx.size))
        k = min(max(k, 1), idx.size - 1)
        perm = rng.permutation(idx)
        test.append(perm[:k])
        train.append(perm[k:])
    if not test:
        raise ClassTooSmall("no rows to split")
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def stratified_split(matrix: FeatureMatrix, test_fraction: float = 0.2, seed: int = 42):
    tr, te = split_indices(matrix.labels, test_fraction, seed)
    return matrix.take(tr), matrix.take(te)


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, rows) -> "Standardizer":
        """Column means and population std; constant columns keep mean 0, std 1
        so they pass through unchanged."""
        x = np.atleast_2d(np.asarray(rows, dtype=np.float64))
        if x.shape[0] == 0:
            raise ValueError("cannot fit a standardizer on zero rows")
        mean = x.mean(axis=0)
        std = x.std(axis=0)
        const = std < STD_FLOOR
        return cls(np.where(const, 0.0, mean), np.where(const, 1.0, std))

    def _check(self, x):
        if x.shape[-1] != self.mean.shape[0]:
            raise DimensionMismatch(f"expected {self.mean.shape[0]} features, got {x.shape[-1]}")

    def apply(self, rows):
        if isinstance(rows, FeatureMatrix):
            return replace(rows, rows=self.apply(rows.rows), standardized=True)
        x = np.asarray(rows, dtype=np.float64)
        self._check(x)
        return (x - self.mean) / self.std

    def inverse(self, rows) -> np.ndarray:
        x = np.asarray(rows, dtype=np.float64)
        self._check(x)
        return x * self.std + self.mean

    def to_dict(self) -> dict:
        return {"mean": [float(v) for v in self.mean], "std": [float(v) for v in self.std]}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(np.asarray(d["mean"], dtype=np.float64), np.asarray(d["std"], dtype=np.float64))


def balance_indices(labels, seed: int = 42) -> np.ndarray:
    """Every row index plus seeded duplicates of minority rows until the classes are equal."""
    labels = np.asarray(labels)
    n1 = int(np.sum(labels == 1))
    n0 = len(labels) - n1
    base = np.arange(len(labels))
    if n0 == n1 or min(n0, n1) == 0:
        return base
    idx = np.flatnonzero(labels == (0 if n0 < n1 else 1))
    extra = np.random.default_rng(seed).choice(idx, abs(n1 - n0), replace=True)
    return np.concatenate([base, np.sort(extra)])


def balance(matrix: FeatureMatrix, seed: int = 42) -> FeatureMatrix:
    return matrix.take(balance_indices(matrix.labels, seed))
