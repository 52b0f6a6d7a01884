"""
Forest, margin and recurrent classifiers on a synthetic herd
============================================================

Build a balanced labelled corpus, extract features, hold out 20% of the calls
and compare the three learned models. The forest and the SVM see frequency,
loudness and duration; the recurrent network sees the MFCC frame sequence.

Run with ``python demos/02_classifier_comparison.py [out_dir]``. ROC curves and
the importance chart are written as SVG into ``out_dir`` (default
``demo_output/``).
"""

import sys
import time
from pathlib import Path

from herdsig import synth
from herdsig.audio_io import CorpusManifest, load_wav
from herdsig.features import features_to_csv, read_feature_csv
from herdsig.pipeline import evaluate_model, extract_clip, holdout_records, importances, train_model
from herdsig.plots import bar_chart

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output")
corpus_dir = out / "corpus"

# 60 calls per class from the non-overlapping part of each class's F0 band.
t0 = time.perf_counter()
manifest = synth.make_corpus(60, seed=7, out_dir=corpus_dir)
print(f"rendered {len(manifest)} calls in {time.perf_counter() - t0:.1f} s")

# Segment every file and extract one feature row (plus MFCC frames) per event.
t0 = time.perf_counter()
rows, sequences = [], {}
for entry in CorpusManifest.load(corpus_dir / "manifest.csv"):
    r, s = extract_clip(load_wav(corpus_dir / entry.wav_path), entry.label, with_sequences=True)
    rows += r
    sequences.update(s)
csv_text = features_to_csv(rows)
(out / "features.csv").write_text(csv_text)
_, records = read_feature_csv(csv_text)
print(f"extracted {len(records)} events in {time.perf_counter() - t0:.1f} s\n")

# Same stratified split for every model; scaling statistics come from training rows only.
reports = {}
for kind in ("rf", "svm", "rnn"):
    t0 = time.perf_counter()
    model = train_model(records, kind, sequences=sequences)
    rep = evaluate_model(model, holdout_records(model, records), sequences)
    reports[kind] = rep
    (out / f"roc_{kind}.svg").write_text(rep.roc.to_svg())
    print(f"== {kind} ({time.perf_counter() - t0:.1f} s) ==\n{rep.table().rstrip()}\n")
    if kind == "rf":
        imp = importances(model)
        ranked = sorted(imp.items(), key=lambda kv: -kv[1])
        (out / "importance.svg").write_text(
            bar_chart([k for k, _ in ranked], [v for _, v in ranked], "Feature importance"))
        print("importance: " + ", ".join(f"{k} {v:.3f}" for k, v in ranked) + "\n")

# Synthetic classes are separable by construction, so all three models do well;
# the ordering between them is not meaningful at this size.
for kind, rep in reports.items():
    print(f"{kind:<4} accuracy {rep.metrics.accuracy:.4f}  AUC {rep.roc.auc:.4f}")
print(f"\nSVG charts written to {out}/")
