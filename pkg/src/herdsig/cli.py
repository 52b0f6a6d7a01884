"""Command-line entry point: ``herdsig <subcommand> ...``.

Exit codes: 0 success, 2 malformed input (whatever could be processed is still
written), 1 internal error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .audio_io import CorpusManifest, FrameConfig, atomic_write_text, iter_wav_paths, load_wav
from .classifiers import CORE_COLUMNS, TrainedModel
from .errors import HerdsigError, IoFailure, MissingCoreFeature, SchemaMismatch
from .features import (FEATURE_COLUMNS, features_to_csv, read_feature_csv, read_sequence_csv,
                       sequences_to_csv)
from .ontology import OntologyRules, classify, polarity
from .pipeline import (DEFAULT_HYPER, evaluate_model, extract_clip, holdout_records,
                       importances, model_inputs, train_model)
from .plots import bar_chart
from .segmentation import VadConfig, events_to_csv, segment, temporal_stats
from .synth import make_corpus
from .textstats import merge, ngram_counts, top_k

log = logging.getLogger("herdsig")

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT = 0, 1, 2
PREDICTION_HEADER = ("source_id", "start_s", "label", "score", "polarity")


class InputError(Exception):
    """Bad user input; maps to exit code 2."""


# --------------------------------------------------------------------------
# shared helpers

def worker_count(n_jobs: int) -> int:
    cap = os.environ.get("HERDSIG_THREADS", "").strip()
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise InputError(f"HERDSIG_THREADS must be an integer, got {cap!r}") from None
    return max(1, min(n, n_jobs))


def run_jobs(fn, jobs):
    """Results of ``fn`` over ``jobs`` in input order."""
    n = worker_count(len(jobs))
    if n <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, jobs))


def write_run_json(out_dir, args) -> None:
    """Echo the resolved configuration next to the outputs."""
    config = {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items())
              if k != "func"}
    doc = {"tool": "herdsig", "version": __version__, "config": config}
    atomic_write_text(Path(out_dir) / "run.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _out_file(path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _read_text(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise InputError(f"{path}: no such file") from None
    except UnicodeDecodeError:
        raise InputError(f"{path}: not UTF-8 text") from None


def read_features(path):
    try:
        _, records = read_feature_csv(_read_text(path))
    except (SchemaMismatch, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from None
    return records


def read_sequences(path):
    if path is None:
        return None
    try:
        return read_sequence_csv(_read_text(path))
    except (SchemaMismatch, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from None


def load_model(path) -> TrainedModel:
    try:
        return TrainedModel.from_json(_read_text(path))
    except (SchemaMismatch, ValueError, KeyError, TypeError) as exc:
        raise InputError(f"{path}: not a valid model file ({exc})") from None


def frame_config(args) -> FrameConfig:
    return FrameConfig(args.frame_ms, args.hop_ms, args.window)


def vad_config(args) -> VadConfig:
    return VadConfig(args.threshold_db, args.hang_ms, args.min_event_ms, args.merge_gap_ms)


def collect_inputs(inputs):
    """``[(path, label)]`` sorted by path from manifests, WAV files and directories."""
    found = {}
    for item in inputs:
        p = Path(item)
        if p.is_dir():
            for w in iter_wav_paths(p):
                found.setdefault(str(w), None)
        elif p.suffix.lower() == ".csv":
            try:
                manifest = CorpusManifest.from_csv(_read_text(p))
            except ValueError as exc:
                raise InputError(f"{p}: {exc}") from None
            for e in manifest:
                found[str(manifest.resolve(e, p.parent))] = e.label
        else:
            found.setdefault(str(p), None)
    return sorted(found.items())


# --------------------------------------------------------------------------
# per-file jobs (module level so worker processes can import them)

def _extract_job(job):
    path, label, whole, frame_cfg, vad, with_seq = job
    try:
        clip = load_wav(path)
        rows, seqs = extract_clip(clip, label, whole, frame_cfg, vad, with_seq)
        return rows, seqs, None
    except (HerdsigError, ValueError, OSError) as exc:
        return [], {}, f"{path}: {exc}"


def _segment_job(job):
    path, frame_cfg, vad = job
    try:
        clip = load_wav(path)
        events = segment(clip, frame_cfg, vad)
        return events, temporal_stats(events, len(clip) / clip.sample_rate), None
    except (HerdsigError, ValueError, OSError) as exc:
        return [], None, f"{path}: {exc}"


# --------------------------------------------------------------------------
# subcommands

def cmd_extract(args) -> int:
    entries = collect_inputs(args.inputs)
    if not entries:
        raise InputError("no input files")
    jobs = [(p, lab, args.whole_clip, frame_config(args), vad_config(args),
             args.sequences is not None) for p, lab in entries]
    rows, seqs, failed = [], {}, 0
    for r, s, err in run_jobs(_extract_job, jobs):
        if err:
            failed += 1
            print(f"error: {err}", file=sys.stderr)
        rows.extend(r)
        seqs.update(s)
    out = _out_file(args.out)
    atomic_write_text(out, features_to_csv(rows))
    if args.sequences is not None:
        atomic_write_text(_out_file(args.sequences), sequences_to_csv(seqs))
    write_run_json(out.parent, args)
    log.info("%d rows from %d files (%d failed)", len(rows), len(entries), failed)
    return EXIT_INPUT if failed else EXIT_OK


def cmd_segment(args) -> int:
    entries = collect_inputs(args.inputs)
    if not entries:
        raise InputError("no input files")
    jobs = [(p, frame_config(args), vad_config(args)) for p, _ in entries]
    events, stats, failed = [], [], 0
    for (path, _), (ev, st, err) in zip(entries, run_jobs(_segment_job, jobs)):
        if err:
            failed += 1
            print(f"error: {err}", file=sys.stderr)
            continue
        events.extend(ev)
        stats.append((Path(path).stem, st))
    out = _out_file(args.out)
    atomic_write_text(out, events_to_csv(events))
    if args.stats is not None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("source_id", "event_count", "total_span_s", "vocalization_rate",
                    "mean_interval_s", "min_interval_s", "max_interval_s"))
        for sid, st in stats:
            w.writerow([sid, st.event_count] + [
                "" if v is None else f"{v:.6g}" for v in
                (st.total_span_s, st.vocalization_rate, st.mean_interval_s, st.min_interval_s,
                 st.max_interval_s)])
        atomic_write_text(_out_file(args.stats), buf.getvalue())
    write_run_json(out.parent, args)
    return EXIT_INPUT if failed else EXIT_OK


def cmd_classify(args) -> int:
    records = read_features(args.features)
    rows, failed = [], 0
    if args.mode == "ontology":
        try:
            rules = OntologyRules.load(args.rules) if args.rules else OntologyRules()
        except (OSError, ValueError, KeyError) as exc:
            raise InputError(f"{args.rules}: {exc}") from None
        for r in records:
            try:
                p = classify(r, rules)
            except MissingCoreFeature as exc:
                failed += 1
                print(f"error: {r['source_id']}@{r['start_s']}: {exc}", file=sys.stderr)
                continue
            rows.append((r["source_id"], r["start_s"], p.label.value, p.score, p.polarity))
    else:
        if not args.model:
            raise InputError("--mode model needs --model")
        model = load_model(args.model)
        try:
            labels, scores = model.predict(model_inputs(model, records,
                                                        read_sequences(args.sequences)))
        except SchemaMismatch as exc:
            raise InputError(str(exc)) from None
        for r, lab, s in zip(records, labels, scores):
            name = "HFC" if lab == 1 else "LFC"
            rows.append((r["source_id"], r["start_s"], name, float(s), polarity(name)))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PREDICTION_HEADER)
    for sid, start, lab, score, pol in rows:
        w.writerow([sid, f"{start:.6g}", lab, f"{score:.6g}", pol])
    out = _out_file(args.out)
    atomic_write_text(out, buf.getvalue())
    write_run_json(out.parent, args)
    return EXIT_INPUT if failed else EXIT_OK


def cmd_train(args) -> int:
    records = read_features(args.features)
    columns = FEATURE_COLUMNS if args.full_features else CORE_COLUMNS
    hyper = {"n_trees": args.trees, "max_depth": args.max_depth, "min_leaf": args.min_leaf,
             "C": args.C, "epochs": args.epochs, "lr": args.lr, "hidden": args.hidden}
    hyper = {k: v for k, v in hyper.items() if k in DEFAULT_HYPER[args.kind]}
    try:
        model = train_model(records, args.kind, columns, args.test_fraction, args.seed,
                            args.balance, read_sequences(args.sequences), **hyper)
    except (SchemaMismatch, ValueError) as exc:
        raise InputError(str(exc)) from None
    out = _out_file(args.out)
    model.save(out)
    write_run_json(out.parent, args)
    log.info("trained %s on %d rows, %d held out", args.kind,
             len(records) - len(model.holdout_ids), len(model.holdout_ids))
    return EXIT_OK


def _evaluate(model, records, sequences, all_rows: bool):
    chosen = list(records) if all_rows else holdout_records(model, records)
    try:
        return evaluate_model(model, chosen, sequences)
    except (SchemaMismatch, ValueError) as exc:
        raise InputError(str(exc)) from None


def cmd_evaluate(args) -> int:
    records = read_features(args.features)
    model = load_model(args.model)
    report = _evaluate(model, records, read_sequences(args.sequences), args.all_rows)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out / "report.json", report.to_json())
    atomic_write_text(out / "roc.csv", report.roc.to_csv())
    atomic_write_text(out / "roc.svg", report.roc.to_svg(f"ROC ({model.kind})"))
    write_run_json(out, args)
    sys.stdout.write(report.table())
    return EXIT_OK


SUMMARY_HEADER = ("model", "accuracy", "hfc_precision", "hfc_recall", "hfc_f1", "lfc_precision",
                  "lfc_recall", "lfc_f1", "macro_f1", "weighted_f1", "auc")


def cmd_report(args) -> int:
    records = read_features(args.features)
    sequences = read_sequences(args.sequences)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_HEADER)
    text, docs, bars = [], {}, None
    for path in args.models:
        model = load_model(path)
        name = Path(path).stem
        rep = _evaluate(model, records, sequences, args.all_rows)
        m = rep.metrics
        w.writerow([name] + [f"{v:.4f}" for v in (
            m.accuracy, m.hfc.precision, m.hfc.recall, m.hfc.f1, m.lfc.precision, m.lfc.recall,
            m.lfc.f1, m.macro["f1"], m.weighted["f1"], rep.roc.auc)])
        text.append(f"== {name} ({model.kind}) ==\n{rep.table()}")
        docs[name] = rep.to_dict()
        if model.kind == "rf":
            imp = importances(model)
            docs[name]["importances"] = imp
            if bars is None:
                ranked = sorted(imp.items(), key=lambda kv: (-kv[1], kv[0]))
                bars = bar_chart([k for k, _ in ranked], [v for _, v in ranked],
                                 f"Feature importance ({name})")
    atomic_write_text(out / "summary.csv", buf.getvalue())
    atomic_write_text(out / "report.txt", "\n".join(text))
    atomic_write_text(out / "report.json", json.dumps(docs, indent=2, sort_keys=True) + "\n")
    if bars is not None:
        atomic_write_text(out / "importance.svg", bars)
    write_run_json(out, args)
    sys.stdout.write("\n".join(text))
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.n < 2 or args.n % 2:
        raise InputError("--n must be an even number of calls, at least 2")
    out = Path(args.out)
    make_corpus(args.n // 2, args.seed, out, args.sample_rate, exclude_overlap=not args.inclusive)
    write_run_json(out, args)
    return EXIT_OK


def cmd_ngram(args) -> int:
    tables = [ngram_counts(_read_text(p), args.n) for p in sorted(args.inputs)]
    table = merge(tables)
    if args.top:
        table = top_k(table, args.top)
    out = _out_file(args.out)
    atomic_write_text(out, table.to_csv())
    if args.svg:
        atomic_write_text(_out_file(args.svg), table.to_svg())
    write_run_json(out.parent, args)
    if table.entries:
        log.info("top %d-gram: %s (%d)", args.n, *table.entries[0])
    return EXIT_OK


# --------------------------------------------------------------------------
# parser

def _add_analysis(p):
    g = p.add_argument_group("framing and activity detection")
    g.add_argument("--frame-ms", type=float, default=25.0)
    g.add_argument("--hop-ms", type=float, default=10.0)
    g.add_argument("--window", choices=("rectangular", "hann", "hamming"), default="hann")
    g.add_argument("--threshold-db", type=float, default=-35.0)
    g.add_argument("--hang-ms", type=float, default=120.0)
    g.add_argument("--min-event-ms", type=float, default=100.0)
    g.add_argument("--merge-gap-ms", type=float, default=50.0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="herdsig", description="Cow-call analysis pipeline.")
    ap.add_argument("--version", action="version", version=f"herdsig {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("extract", help="segment WAVs and write the feature CSV")
    p.add_argument("inputs", nargs="+", help="manifest CSV, WAV files or directories")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--whole-clip", action="store_true", help="one event per file, no segmentation")
    p.add_argument("--sequences", help="also write per-frame MFCC sequences here")
    _add_analysis(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("segment", help="write detected call events")
    p.add_argument("inputs", nargs="+")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--stats", help="per-file temporal statistics CSV")
    _add_analysis(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("classify", help="label feature rows HFC or LFC")
    p.add_argument("features")
    p.add_argument("--mode", choices=("ontology", "model"), default="ontology")
    p.add_argument("--rules", help="ontology rules JSON (default: built-in)")
    p.add_argument("--model", help="model JSON for --mode model")
    p.add_argument("--sequences")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("train", help="fit rf, svm or rnn on a labelled feature CSV")
    p.add_argument("features")
    p.add_argument("--kind", choices=("rf", "svm", "rnn"), required=True)
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--full-features", action="store_true")
    p.add_argument("--balance", action="store_true", help="oversample the minority class")
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--sequences", help="MFCC sequence CSV (rnn)")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--trees", type=int)
    p.add_argument("--max-depth", type=int)
    p.add_argument("--min-leaf", type=int)
    p.add_argument("--C", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--hidden", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a model on its held-out rows")
    p.add_argument("features")
    p.add_argument("--model", required=True)
    p.add_argument("--sequences")
    p.add_argument("--all-rows", action="store_true", help="ignore the model's held-out keys")
    p.add_argument("-o", "--out", required=True, help="output directory")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="compare several models and chart importances")
    p.add_argument("features")
    p.add_argument("--models", nargs="+", required=True)
    p.add_argument("--sequences")
    p.add_argument("--all-rows", action="store_true")
    p.add_argument("-o", "--out", required=True, help="output directory")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("synth", help="render a labelled synthetic corpus")
    p.add_argument("--n", type=int, default=100, help="total calls, split evenly by class")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--inclusive", action="store_true",
                   help="draw F0 over the full class ranges, which overlap")
    p.add_argument("--sample-rate", type=int, default=16000)
    p.add_argument("-o", "--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ngram", help="character n-gram counts over transcripts")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--n", type=int, choices=(1, 2), default=2)
    p.add_argument("--top", type=int, default=20)
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--svg")
    p.set_defaults(func=cmd_ngram)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose > 1 else
                        logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except IoFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (InputError, HerdsigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
