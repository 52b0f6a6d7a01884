"""End-to-end steps shared by the command line, the demos and the tests."""
from __future__ import annotations

import numpy as np

from .audio_io import AudioClip, FrameConfig
from .classifiers import (CORE_COLUMNS, Standardizer, TrainedModel, balance, balance_indices,
                          feature_importance, matrix_from_records, record_key, split_indices,
                          train_forest, train_rnn, train_svm)
from .errors import SchemaMismatch
from .evaluation import EvalReport, evaluate
from .features import MFCC_COLUMNS, extract_all, feature_row, mfcc_sequence
from .labels import CallLabel
from .segmentation import VadConfig, VocalEvent, segment

DEFAULT_HYPER = {
    "rf": {"n_trees": 100, "max_depth": 12, "min_leaf": 2},
    "svm": {"C": 1.0, "epochs": 200},
    "rnn": {"hidden": 32, "epochs": 60, "lr": 0.1},
}


def clip_events(clip: AudioClip, whole_clip: bool = False, frame_cfg: FrameConfig = FrameConfig(),
                vad: VadConfig = VadConfig()) -> list:
    if whole_clip:
        return [VocalEvent.whole(clip, frame_cfg)]
    return segment(clip, frame_cfg, vad)


def extract_clip(clip: AudioClip, label=None, whole_clip: bool = False,
                 frame_cfg: FrameConfig = FrameConfig(), vad: VadConfig = VadConfig(),
                 with_sequences: bool = False):
    """``(feature_rows, sequences)`` for every event of ``clip``."""
    rows, seqs = [], {}
    for ev in clip_events(clip, whole_clip, frame_cfg, vad):
        rows.append(feature_row(extract_all(ev, frame_cfg), ev, label=label))
        if with_sequences:
            seqs[record_key(ev.source_id, ev.start_s)] = mfcc_sequence(ev, frame_cfg)
    return rows, seqs


def record_labels(records) -> np.ndarray:
    out = []
    for r in records:
        lab = r.get("label")
        if lab in (None, ""):
            raise SchemaMismatch("training needs a label on every row")
        out.append(CallLabel.parse(lab).as_int)
    return np.asarray(out, dtype=np.int64)


def _sequences_for(keys, sequences) -> list:
    if sequences is None:
        raise SchemaMismatch("the rnn model needs MFCC sequences")
    missing = [k for k in keys if k not in sequences]
    if missing:
        raise SchemaMismatch(f"no MFCC sequence for {missing[0]}")
    return [sequences[k] for k in keys]


def train_model(records, kind: str, columns=CORE_COLUMNS, test_fraction: float = 0.2,
                seed: int = 42, balance_classes: bool = False, sequences=None,
                **hyper) -> TrainedModel:
    """Stratified split, fit on the training part, remember the held-out keys.

    Imputation medians and standardization statistics come from training rows
    only.
    """
    if kind not in DEFAULT_HYPER:
        raise ValueError(f"unknown model kind {kind!r}")
    params = {**DEFAULT_HYPER[kind], **{k: v for k, v in hyper.items() if v is not None}}
    records = list(records)
    labels = record_labels(records)
    tr, te = split_indices(labels, test_fraction, seed)
    train_recs = [records[i] for i in tr]
    holdout = tuple(record_key(records[i]["source_id"], records[i]["start_s"]) for i in te)

    if kind == "rnn":
        keys = [record_key(r["source_id"], r["start_s"]) for r in train_recs]
        seqs = _sequences_for(keys, sequences)
        y = labels[tr]
        if balance_classes:
            order = balance_indices(y, seed)
            seqs, y = [seqs[i] for i in order], y[order]
        std = Standardizer.fit(np.vstack(seqs))
        net = train_rnn([std.apply(s) for s in seqs], y, hidden=int(params["hidden"]),
                        epochs=int(params["epochs"]), lr=float(params["lr"]), seed=seed)
        return TrainedModel("rnn", net, std, MFCC_COLUMNS, np.zeros(len(MFCC_COLUMNS)), seed,
                            holdout)

    train = matrix_from_records(train_recs, columns)
    if balance_classes:
        train = balance(train, seed)
    std = Standardizer.fit(train.rows)
    if kind == "rf":
        fitted = train_forest(std.apply(train), n_trees=int(params["n_trees"]),
                              max_depth=int(params["max_depth"]),
                              min_leaf=int(params["min_leaf"]), seed=seed)
    else:
        fitted = train_svm(std.apply(train), C=float(params["C"]), epochs=int(params["epochs"]),
                           seed=seed)
    return TrainedModel(kind, fitted, std, tuple(columns), train.medians, seed, holdout)


def model_inputs(model: TrainedModel, records, sequences=None):
    """What ``model.scores`` expects for ``records``."""
    if model.kind == "rnn":
        return _sequences_for([record_key(r["source_id"], r["start_s"]) for r in records],
                              sequences)
    return matrix_from_records(records, model.columns, model.imputation_medians,
                               require_labels=False).rows


def holdout_records(model: TrainedModel, records) -> list:
    """Rows whose key the model held out, or every row when none match."""
    keep = set(model.holdout_ids)
    chosen = [r for r in records if record_key(r["source_id"], r["start_s"]) in keep]
    return chosen or list(records)


def evaluate_model(model: TrainedModel, records, sequences=None) -> EvalReport:
    records = list(records)
    labels = record_labels(records)
    pred, scores = model.predict(model_inputs(model, records, sequences))
    return evaluate(labels, pred, scores, model_kind=model.kind)


def importances(model: TrainedModel) -> dict:
    if model.kind != "rf":
        raise ValueError("importances are defined for forests only")
    return dict(zip(model.columns, feature_importance(model.model).tolist()))

