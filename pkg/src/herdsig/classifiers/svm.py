"""Linear soft-margin SVM trained by Pegasos-style sub-gradient descent."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionMismatch, EmptyTrainingSet, NotStandardized
from .data import FeatureMatrix


@dataclass(frozen=True)
class LinearSvm:
    w: np.ndarray
    b: float
    C: float = 1.0
    epochs: int = 200
    seed: int = 42
    history: tuple = field(default=(), compare=False)

    def hyperparameters(self) -> dict:
        return {"C": self.C, "epochs": self.epochs}

    def to_dict(self) -> dict:
        return {"w": [float(v) for v in self.w], "b": float(self.b)}

    @classmethod
    def from_dict(cls, d: dict, hyper: dict, seed: int) -> "LinearSvm":
        return cls(np.asarray(d["w"], dtype=np.float64), float(d["b"]),
                   float(hyper["C"]), int(hyper["epochs"]), int(seed))


def svm_objective(w, b, x, y_pm, C: float) -> float:
    """``0.5 |w|^2 + C * sum(hinge)`` with labels in {-1, +1}."""
    margins = y_pm * (x @ w + b)
    return float(0.5 * np.dot(w, w) + C * np.sum(np.maximum(0.0, 1.0 - margins)))


def optimal_bias(scores: np.ndarray, y_pm: np.ndarray) -> float:
    """Exact minimizer over b of the summed hinge loss for fixed ``w``.

    The loss is piecewise linear with kinks at ``y_i - s_i``; when a whole
    interval is optimal its midpoint is returned.
    """
    kinks = np.sort(y_pm - scores)
    loss = np.maximum(0.0, 1.0 - y_pm[None, :] * (scores[None, :] + kinks[:, None])).sum(axis=1)
    best = np.flatnonzero(loss <= loss.min() + 1e-12)
    return float(0.5 * (kinks[best[0]] + kinks[best[-1]]))


def train_svm(train: FeatureMatrix, C: float = 1.0, epochs: int = 200, seed: int = 42,
              require_standardized: bool = True) -> LinearSvm:
    """Sub-gradient descent on ``w`` with step ``1/(lambda t)``, ``lambda = 1/(C n)``,
    visiting rows in a fresh seeded permutation each epoch.

    The unregularized bias is not stepped (its huge early steps never decay);
    it is set to its exact minimizer after every epoch. The model averages the
    last 10% of ``w`` iterates and refits the bias for that average.
    ``history`` holds, per epoch, the objective of the running average of all
    iterates so far.
    """
    if require_standardized and not train.standardized:
        raise NotStandardized("SVM input must be standardized first")
    n = len(train)
    if n == 0:
        raise EmptyTrainingSet("no training rows")
    if C <= 0 or epochs < 1:
        raise ValueError("C > 0 and epochs >= 1 required")
    x = train.rows
    y = 2.0 * train.labels - 1.0
    lam = 1.0 / (C * n)
    rng = np.random.default_rng(seed)
    w = np.zeros(x.shape[1])
    b = 0.0
    total = epochs * n
    tail_start = total - max(1, total // 10)
    w_tail = np.zeros_like(w)
    n_tail = 0
    w_run = np.zeros_like(w)
    history = []
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            active = y[i] * (np.dot(w, x[i]) + b) < 1.0
            w *= 1.0 - eta * lam
            if active:
                w += eta * y[i] * x[i]
            w_run += w
            if t > tail_start:
                w_tail += w
                n_tail += 1
        b = optimal_bias(x @ w, y)
        avg = w_run / t
        history.append(svm_objective(avg, optimal_bias(x @ avg, y), x, y, C))
    w_final = w_tail / n_tail
    return LinearSvm(w_final, optimal_bias(x @ w_final, y), C, epochs, seed, tuple(history))


def svm_scores(model: LinearSvm, rows) -> np.ndarray:
    x = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if x.shape[1] != model.w.shape[0]:
        raise DimensionMismatch(f"expected {model.w.shape[0]} features, got {x.shape[1]}")
    return x @ model.w + model.b


def svm_predict(model: LinearSvm, row):
    """``(label, score)``; a point on the hyperplane (score 0) is HFC."""
    x = np.asarray(row, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch("svm_predict takes a single row")
    s = float(svm_scores(model, x[None, :])[0])
    return int(s >= 0.0), s
