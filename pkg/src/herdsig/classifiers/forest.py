"""Random forest of Gini decision trees."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch, EmptyTrainingSet
from .data import FeatureMatrix

MIN_GAIN = 1e-12


@dataclass(frozen=True)
class Tree:
    """Flat node arrays. Leaves have ``feature == -1``; ``counts`` holds the
    (LFC, HFC) training counts reaching every node."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def leaf_index(self, rows: np.ndarray) -> np.ndarray:
        node = np.zeros(rows.shape[0], dtype=np.int64)
        active = self.feature[node] >= 0
        while np.any(active):
            i = np.flatnonzero(active)
            f = self.feature[node[i]]
            go_left = rows[i, f] <= self.threshold[node[i]]
            node[i] = np.where(go_left, self.left[node[i]], self.right[node[i]])
            active = self.feature[node] >= 0
        return node

    def hfc_fraction(self, rows: np.ndarray) -> np.ndarray:
        c = self.counts[self.leaf_index(rows)]
        return c[:, 1] / c.sum(axis=1)

    def to_dict(self) -> dict:
        return {
            "feature": [int(v) for v in self.feature],
            "threshold": [float(v) for v in self.threshold],
            "left": [int(v) for v in self.left],
            "right": [int(v) for v in self.right],
            "counts": [[int(a), int(b)] for a, b in self.counts],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(np.asarray(d["feature"], dtype=np.int64),
                   np.asarray(d["threshold"], dtype=np.float64),
                   np.asarray(d["left"], dtype=np.int64),
                   np.asarray(d["right"], dtype=np.int64),
                   np.asarray(d["counts"], dtype=np.int64).reshape(-1, 2))


@dataclass(frozen=True)
class Forest:
    trees: tuple
    n_features: int
    n_trees: int = 100
    max_depth: int = 12
    min_leaf: int = 2
    seed: int = 42

    def hyperparameters(self) -> dict:
        return {"n_trees": self.n_trees, "max_depth": self.max_depth, "min_leaf": self.min_leaf}

    def to_dict(self) -> dict:
        return {"n_features": self.n_features, "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d: dict, hyper: dict, seed: int) -> "Forest":
        return cls(tuple(Tree.from_dict(t) for t in d["trees"]), int(d["n_features"]),
                   int(hyper["n_trees"]), int(hyper["max_depth"]), int(hyper["min_leaf"]), int(seed))


def gini(counts) -> float:
    c = np.asarray(counts, dtype=np.float64)
    n = c.sum()
    if n <= 0:
        return 0.0
    p = c / n
    return float(1.0 - np.sum(p * p))


def best_split(x: np.ndarray, y: np.ndarray, features, min_leaf: int):
    """Lowest weighted-Gini split over ``features``.

    Returns ``(feature, threshold, weighted_gini)`` or None. Thresholds are
    midpoints between consecutive distinct values; ties keep the first feature
    in ``features`` and the lowest threshold.
    """
    n = len(y)
    best = None
    sizes = np.arange(1, n)
    valid_size = (sizes >= min_leaf) & (n - sizes >= min_leaf)
    if not np.any(valid_size):
        return None
    for f in features:
        order = np.argsort(x[:, f], kind="stable")
        xs = x[order, f]
        ys = y[order]
        ones_left = np.cumsum(ys)[:-1]
        total_ones = ones_left[-1] + ys[-1] if n > 1 else ys.sum()
        ok = valid_size & (xs[1:] > xs[:-1])
        if not np.any(ok):
            continue
        nl = sizes.astype(np.float64)
        nr = n - nl
        pl = ones_left / nl
        pr = (total_ones - ones_left) / nr
        gl = 2.0 * pl * (1.0 - pl)
        gr = 2.0 * pr * (1.0 - pr)
        w = np.where(ok, (nl * gl + nr * gr) / n, np.inf)
        i = int(np.argmin(w))
        if best is None or w[i] < best[2]:
            best = (int(f), 0.5 * (xs[i] + xs[i + 1]), float(w[i]))
    return best


def _grow(x, y, rng, max_depth, min_leaf, n_try):
    feature, threshold, left, right, counts = [], [], [], [], []

    def node(idx, depth):
        k = len(feature)
        ones = int(y[idx].sum())
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append((len(idx) - ones, ones))
        if depth >= max_depth or ones == 0 or ones == len(idx) or len(idx) < 2 * min_leaf:
            return k
        feats = rng.choice(x.shape[1], size=n_try, replace=False)
        split = best_split(x[idx], y[idx], feats, min_leaf)
        if split is None or gini(counts[k]) - split[2] <= MIN_GAIN:
            return k
        f, t, _ = split
        go_left = x[idx, f] <= t
        feature[k] = f
        threshold[k] = t
        left[k] = node(idx[go_left], depth + 1)
        right[k] = node(idx[~go_left], depth + 1)
        return k

    node(np.arange(len(y)), 0)
    return Tree(np.array(feature, dtype=np.int64), np.array(threshold, dtype=np.float64),
                np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
                np.array(counts, dtype=np.int64).reshape(-1, 2))


def train_tree(x: np.ndarray, y: np.ndarray, tree_seed: int, max_depth: int = 12,
               min_leaf: int = 2, bootstrap: bool = True) -> Tree:
    rng = np.random.default_rng(tree_seed)
    n = len(y)
    idx = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
    n_try = max(1, int(math.floor(math.sqrt(x.shape[1]))))
    return _grow(x[idx], y[idx], rng, max_depth, min_leaf, n_try)


def train_forest(train: FeatureMatrix, n_trees: int = 100, max_depth: int = 12,
                 min_leaf: int = 2, seed: int = 42) -> Forest:
    """Bagged Gini trees; tree ``t`` draws from ``default_rng(seed + t)``."""
    if len(train) == 0:
        raise EmptyTrainingSet("no training rows")
    if n_trees < 1 or max_depth < 0 or min_leaf < 1:
        raise ValueError("n_trees >= 1, max_depth >= 0 and min_leaf >= 1 required")
    trees = tuple(train_tree(train.rows, train.labels, seed + t, max_depth, min_leaf)
                  for t in range(n_trees))
    return Forest(trees, train.n_features, n_trees, max_depth, min_leaf, seed)


def _rows(model: Forest, rows) -> np.ndarray:
    x = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if x.shape[1] != model.n_features:
        raise DimensionMismatch(f"expected {model.n_features} features, got {x.shape[1]}")
    return x


def forest_proba(model: Forest, rows) -> np.ndarray:
    """Mean leaf HFC fraction across trees, one value per row."""
    x = _rows(model, rows)
    return np.mean([t.hfc_fraction(x) for t in model.trees], axis=0)


def forest_predict(model: Forest, row):
    """``(label, probability)`` for one row; label is 1 (HFC) iff probability >= 0.5."""
    x = np.asarray(row, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch("forest_predict takes a single row")
    p = float(forest_proba(model, x[None, :])[0])
    return int(p >= 0.5), p


def feature_importance(model: Forest) -> np.ndarray:
    """Mean-decrease-in-impurity importances normalized to sum 1 (zeros when
    no tree ever split)."""
    total = np.zeros(model.n_features)
    for t in model.trees:
        imp = np.zeros(model.n_features)
        n_root = t.counts[0].sum()
        for k in np.flatnonzero(t.feature >= 0):
            l, r = t.left[k], t.right[k]
            nk = t.counts[k].sum()
            decrease = gini(t.counts[k]) - (t.counts[l].sum() * gini(t.counts[l])
                                            + t.counts[r].sum() * gini(t.counts[r])) / nk
            imp[t.feature[k]] += nk / n_root * decrease
        total += imp
    total /= len(model.trees)
    s = total.sum()
    return total / s if s > 0 else total
