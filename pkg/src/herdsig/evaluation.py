"""Confusion counts, precision/recall/F1, ROC and AUC with HFC as the positive class."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from decimal import ROUND_DOWN, ROUND_HALF_UP, Decimal

import numpy as np

from .errors import LengthMismatch, SingleClassInput
from .labels import CallLabel
from .plots import line_chart


def _as_int_labels(labels) -> np.ndarray:
    out = []
    for v in labels:
        if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
            out.append(CallLabel.parse(int(v)).as_int)
        else:
            out.append(CallLabel.parse(v).as_int)
    return np.asarray(out, dtype=np.int64)


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def swapped(self) -> "ConfusionMatrix":
        """The same counts with LFC taken as the positive class."""
        return ConfusionMatrix(tp=self.tn, fp=self.fn, fn=self.fp, tn=self.tp)

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


def confusion(labels_true, labels_pred) -> ConfusionMatrix:
    t = _as_int_labels(labels_true)
    p = _as_int_labels(labels_pred)
    if len(t) != len(p):
        raise LengthMismatch(f"{len(t)} true labels but {len(p)} predictions")
    if len(t) == 0:
        raise LengthMismatch("no labels to compare")
    return ConfusionMatrix(tp=int(np.sum((t == 1) & (p == 1))), fp=int(np.sum((t == 0) & (p == 1))),
                           fn=int(np.sum((t == 1) & (p == 0))), tn=int(np.sum((t == 0) & (p == 0))))


def two_decimals(value: float, mode: str = "truncate") -> float:
    """A metric at 2 decimals, by truncation (the convention that reproduces
    published 2-decimal tables from their confusion counts) or half-up."""
    rounding = {"truncate": ROUND_DOWN, "half_up": ROUND_HALF_UP}[mode]
    return float(Decimal(repr(float(value))).quantize(Decimal("0.01"), rounding=rounding))


def _ratio(num: float, den: float):
    return (0.0, True) if den == 0 else (num / den, False)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int
    undefined: tuple = ()

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1,
                "support": self.support, "undefined": list(self.undefined)}


def class_metrics(tp: int, fp: int, fn: int) -> ClassMetrics:
    """Guarded ratios: a 0/0 is reported as 0 and named in ``undefined``."""
    undefined = []
    prec, u = _ratio(tp, tp + fp)
    if u:
        undefined.append("precision")
    rec, u = _ratio(tp, tp + fn)
    if u:
        undefined.append("recall")
    f1, u = _ratio(2.0 * prec * rec, prec + rec)
    if u:
        undefined.append("f1")
    return ClassMetrics(prec, rec, f1, tp + fn, tuple(undefined))


@dataclass(frozen=True)
class Metrics:
    hfc: ClassMetrics
    lfc: ClassMetrics
    macro: dict
    weighted: dict
    accuracy: float

    def to_dict(self) -> dict:
        return {"HFC": self.hfc.to_dict(), "LFC": self.lfc.to_dict(), "macro_avg": self.macro,
                "weighted_avg": self.weighted, "accuracy": self.accuracy}


def prf(cm: ConfusionMatrix) -> Metrics:
    if cm.total <= 0:
        raise ValueError("empty confusion matrix")
    hfc = class_metrics(cm.tp, cm.fp, cm.fn)
    lfc = class_metrics(cm.tn, cm.fn, cm.fp)
    keys = ("precision", "recall", "f1")
    macro = {k: (getattr(hfc, k) + getattr(lfc, k)) / 2.0 for k in keys}
    n = hfc.support + lfc.support
    weighted = {k: (getattr(hfc, k) * hfc.support + getattr(lfc, k) * lfc.support) / n
                for k in keys}
    return Metrics(hfc, lfc, macro, weighted, (cm.tp + cm.tn) / cm.total)


@dataclass(frozen=True)
class RocCurve:
    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float

    def points(self):
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("threshold", "fpr", "tpr"))
        for t, f, p in zip(self.thresholds, self.fpr, self.tpr):
            w.writerow((_fmt(t), _fmt(f), _fmt(p)))
        return buf.getvalue()

    def to_svg(self, title: str = "ROC curve") -> str:
        return line_chart(self.fpr, self.tpr, f"{title} (AUC {self.auc:.4f})",
                          "false positive rate", "true positive rate", diagonal=True)


def _fmt(v: float) -> str:
    if np.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(float(v))


def roc(labels_true, scores) -> RocCurve:
    """Threshold sweep over the distinct scores, highest first; tied scores move
    together. Starts at (0, 0) with threshold +inf and ends at (1, 1)."""
    y = _as_int_labels(labels_true)
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    if len(y) != len(s):
        raise LengthMismatch(f"{len(y)} labels but {len(s)} scores")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    n_pos = int(np.sum(y == 1))
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassInput("ROC needs at least one positive and one negative")
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    last_of_group = np.r_[np.flatnonzero(np.diff(s_sorted) != 0), len(s_sorted) - 1]
    tp = np.cumsum(y_sorted)[last_of_group]
    fp = (last_of_group + 1) - tp
    tpr = np.r_[0.0, tp / n_pos]
    fpr = np.r_[0.0, fp / n_neg]
    thresholds = np.r_[np.inf, s_sorted[last_of_group]]
    area = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(thresholds, fpr, tpr, area)


def auc(labels_true, scores) -> float:
    return roc(labels_true, scores).auc


@dataclass(frozen=True)
class EvalReport:
    confusion: ConfusionMatrix
    metrics: Metrics
    roc: RocCurve | None = None
    model_kind: str = ""

    def to_dict(self) -> dict:
        d = {"model_kind": self.model_kind, "confusion": self.confusion.to_dict(),
             **self.metrics.to_dict()}
        if self.roc is not None:
            d["auc"] = self.roc.auc
            d["roc_points"] = [[f, t] for f, t in self.roc.points()]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def table(self) -> str:
        """Per-class, macro, weighted and accuracy rows at 4 decimals."""
        m = self.metrics
        lines = [f"{'':<14}{'precision':>10}{'recall':>10}{'f1-score':>10}{'support':>9}"]
        for name, c in (("HFC", m.hfc), ("LFC", m.lfc)):
            lines.append(f"{name:<14}{c.precision:>10.4f}{c.recall:>10.4f}{c.f1:>10.4f}{c.support:>9d}")
        n = m.hfc.support + m.lfc.support
        lines.append(f"{'accuracy':<14}{'':>10}{'':>10}{m.accuracy:>10.4f}{n:>9d}")
        for name, avg in (("macro avg", m.macro), ("weighted avg", m.weighted)):
            lines.append(f"{name:<14}{avg['precision']:>10.4f}{avg['recall']:>10.4f}"
                         f"{avg['f1']:>10.4f}{n:>9d}")
        if self.roc is not None:
            lines.append(f"{'auc':<14}{'':>10}{'':>10}{self.roc.auc:>10.4f}")
        return "\n".join(lines) + "\n"


def evaluate(labels_true, labels_pred, scores=None, model_kind: str = "") -> EvalReport:
    cm = confusion(labels_true, labels_pred)
    curve = roc(labels_true, scores) if scores is not None else None
    return EvalReport(cm, prf(cm), curve, model_kind)
