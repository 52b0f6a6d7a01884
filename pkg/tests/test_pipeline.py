import numpy as np
import pytest

from herdsig import synth
from herdsig.classifiers import TrainedModel, record_key
from herdsig.errors import SchemaMismatch
from herdsig.labels import CallLabel
from herdsig.pipeline import (evaluate_model, extract_clip, holdout_records, importances,
                              model_inputs, record_labels, train_model)


def test_whole_clip_matches_segmented_row(hfc_clip):
    whole, _ = extract_clip(hfc_clip, CallLabel.HFC, whole_clip=True)
    seg, _ = extract_clip(hfc_clip, CallLabel.HFC)
    assert len(seg) == 1
    assert whole == seg


def test_sequences_keyed_by_record(lfc_clip):
    rows, seqs = extract_clip(lfc_clip, with_sequences=True)
    (key,) = seqs
    assert key == record_key(rows[0][0], float(rows[0][1]))
    assert seqs[key].shape[1] == 13


def test_one_row_per_corpus_file(small_records):
    records, seqs = small_records
    assert len(records) == 20
    assert sorted(record_labels(records).tolist()) == [0] * 10 + [1] * 10
    assert len(seqs) == 20


@pytest.mark.parametrize("kind", ["rf", "svm"])
def test_tabular_training_round_trip(small_records, kind):
    records, _ = small_records
    model = train_model(records, kind, n_trees=15)
    assert len(model.holdout_ids) == 4
    again = TrainedModel.from_json(model.to_json())
    assert again.to_json() == model.to_json()
    held = holdout_records(model, records)
    assert len(held) == 4
    a = model.predict(model_inputs(model, held))
    b = again.predict(model_inputs(again, held))
    assert np.array_equal(a[1], b[1])
    rep = evaluate_model(model, held)
    assert rep.confusion.total == 4 and rep.roc is not None


def test_training_is_deterministic(small_records):
    records, seqs = small_records
    for kind, extra in (("rf", {"n_trees": 10}), ("svm", {}), ("rnn", {"epochs": 5})):
        a = train_model(records, kind, sequences=seqs, **extra).to_json()
        b = train_model(records, kind, sequences=seqs, **extra).to_json()
        assert a == b


def test_rnn_needs_sequences(small_records):
    records, seqs = small_records
    with pytest.raises(SchemaMismatch):
        train_model(records, "rnn")
    model = train_model(records, "rnn", sequences=seqs, epochs=3)
    assert model.columns[0] == "mfcc_0"
    with pytest.raises(SchemaMismatch):
        evaluate_model(model, records)
    assert evaluate_model(model, records, seqs).confusion.total == 20


def test_importances_only_for_forest(small_records):
    records, _ = small_records
    imp = importances(train_model(records, "rf", n_trees=10))
    assert set(imp) == {"f0_mean", "amplitude_db", "duration_s"}
    assert sum(imp.values()) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        importances(train_model(records, "svm"))


def test_missing_label_rejected(small_records):
    records, _ = small_records
    broken = [dict(r) for r in records]
    broken[3]["label"] = ""
    with pytest.raises(SchemaMismatch):
        train_model(broken, "rf")


def test_holdout_falls_back_to_all_rows(small_records):
    records, _ = small_records
    model = train_model(records, "svm")
    others = [dict(r, source_id="other") for r in records]
    assert len(holdout_records(model, others)) == len(others)


def test_balance_option(small_records):
    records, _ = small_records
    skewed = [r for r in records if r["label"] == "HFC"] + [
        r for r in records if r["label"] == "LFC"][:4]
    model = train_model(skewed, "rf", balance_classes=True, n_trees=5)
    assert model.kind == "rf"
    with pytest.raises(ValueError):
        train_model(records, "knn")


def test_corpus_render_matches_file(small_corpus):
    from herdsig.audio_io import load_wav
    name, spec, _ = synth.corpus_specs(10, 7)[0]
    clip = load_wav(small_corpus / name)
    ref = synth.render(spec)
    assert np.max(np.abs(clip.samples - ref.samples)) <= 1.0 / 32768
