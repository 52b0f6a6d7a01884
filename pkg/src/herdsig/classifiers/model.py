"""Trained-model container with a single-document JSON format."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..audio_io import atomic_write_text
from ..errors import SchemaMismatch
from .data import Standardizer
from .forest import Forest, forest_proba
from .rnn import Rnn, rnn_proba
from .svm import LinearSvm, svm_scores

SCHEMA_VERSION = 1
KINDS = ("rf", "svm", "rnn")
_CLASSES = {"rf": Forest, "svm": LinearSvm, "rnn": Rnn}


@dataclass(frozen=True)
class TrainedModel:
    """A fitted forest, SVM or RNN plus everything needed to score new input.

    Tabular kinds take rows over ``columns``; the RNN takes MFCC sequences and
    its standardizer is per MFCC dimension. Forest rows are standardized too,
    which trees ignore, so every kind shares one input path.
    """

    kind: str
    model: object
    standardizer: Standardizer
    columns: tuple
    imputation_medians: np.ndarray
    seed: int
    holdout_ids: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")

    def scores(self, inputs) -> np.ndarray:
        """HFC probability (rf, rnn) or decision score (svm) per input."""
        if self.kind == "rnn":
            seqs = [self.standardizer.apply(np.atleast_2d(s)) for s in inputs]
            return rnn_proba(self.model, seqs)
        x = self.standardizer.apply(np.atleast_2d(np.asarray(inputs, dtype=np.float64)))
        if self.kind == "rf":
            return forest_proba(self.model, x)
        return svm_scores(self.model, x)

    @property
    def threshold(self) -> float:
        return 0.0 if self.kind == "svm" else 0.5

    def predict(self, inputs):
        """``(labels, scores)``; label 1 (HFC) iff score reaches the threshold."""
        s = self.scores(inputs)
        return (s >= self.threshold).astype(np.int64), s

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": self.kind,
            "columns": list(self.columns),
            "standardizer": self.standardizer.to_dict(),
            "imputation_medians": [float(v) for v in self.imputation_medians],
            "parameters": self.model.to_dict(),
            "hyperparameters": self.model.hyperparameters(),
            "seed": int(self.seed),
            "holdout_ids": list(self.holdout_ids),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True) + "\n"

    def save(self, path) -> None:
        atomic_write_text(path, self.to_json())

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedModel":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise SchemaMismatch(f"unsupported model schema {d.get('schema_version')!r}")
        try:
            kind = d["kind"]
            model = _CLASSES[kind].from_dict(d["parameters"], d["hyperparameters"], d["seed"])
            return cls(kind, model, Standardizer.from_dict(d["standardizer"]), tuple(d["columns"]),
                       np.asarray(d["imputation_medians"], dtype=np.float64), int(d["seed"]),
                       tuple(d.get("holdout_ids", ())))
        except KeyError as exc:
            raise SchemaMismatch(f"model document lacks {exc}") from None

    @classmethod
    def from_json(cls, text: str) -> "TrainedModel":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "TrainedModel":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())
