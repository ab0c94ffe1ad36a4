"""Command-line entry points.

Subcommands: generate (synthetic corpus), train (one fold), evaluate
(full cross-validation + CSV artifacts), diagnose (one child), rank-glyphs
(discriminative ranking CSV), serve (screening HTTP service).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from .glyphs import REAL_GLYPHS
from .recording import load_recordings, save_recordings, serialize_recordings
from .synthesis import CorpusConfig, corpus_manifest, generate_corpus
from .splits import split_dataset
from .augment import augment_training_set
from .recognizer import TrainingHyper, load_model, save_model, train
from .diagnosis import (calibrate_threshold, diagnose, score_session,
                        sessions_from_recordings, d_statistic)
from .evaluation import (corpus_children, emit_confusion_comparison,
                         emit_discriminative_scatter, emit_quantile_data,
                         report_to_json_dict, run_cross_validation)


def _hyper_from_args(args) -> TrainingHyper:
    hyper = TrainingHyper(seed=args.seed)
    overrides = {}
    for name in ("batch_size", "lr", "clip", "patience_epochs", "init_range",
                 "max_epochs"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    return replace(hyper, **overrides) if overrides else hyper


def _add_hyper_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--clip", type=float)
    p.add_argument("--patience-epochs", dest="patience_epochs", type=int)
    p.add_argument("--init-range", dest="init_range", type=float)
    p.add_argument("--max-epochs", dest="max_epochs", type=int)


def cmd_generate(args) -> int:
    config = CorpusConfig(
        td_count=args.td, dysgraphic_count=args.dysgraphic,
        repetitions_per_glyph=args.repetitions, sampling_hz=args.sampling_hz,
        master_seed=args.seed,
    )
    corpus = generate_corpus(config)
    save_recordings(args.out, corpus)
    manifest = corpus_manifest(config, corpus)
    manifest_path = args.manifest or (os.path.splitext(args.out)[0] + ".manifest.json")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    print(f"wrote {len(corpus)} recordings to {args.out}")
    print(f"manifest: {manifest_path} (sha256 {manifest['sha256'][:16]}...)")
    return 0


def _train_fold(corpus, kind, fold_index, fold_count, seed, hyper, star_fraction):
    children = corpus_children(corpus)
    split = split_dataset(children, fold_count, fold_index, seed)
    train_recs = [r for r in corpus if r.child_id in split.training_children]
    valid_recs = [r for r in corpus if r.child_id in split.validation_children]
    dys_recs = [r for r in corpus if r.child_id in split.dysgraphic_children]
    augmented = augment_training_set(train_recs, star_fraction, seed=seed + fold_index)
    model = train(kind, augmented, valid_recs, replace(hyper, seed=seed + fold_index))
    model.extras["split"] = {
        "seed": seed, "fold_index": fold_index, "fold_count": fold_count,
        "validation_children": sorted(split.validation_children),
    }
    valid_sessions = sessions_from_recordings(valid_recs)
    for s in valid_sessions:
        score_session(model, s)
    cal = calibrate_threshold([d_statistic(s) for s in valid_sessions],
                              source=f"fold{fold_index}")
    model.extras["calibration"] = {"threshold": cal.threshold, "rate": cal.rate,
                                   "source": cal.source}
    return model, valid_sessions, dys_recs


def cmd_train(args) -> int:
    corpus = load_recordings(args.corpus)
    hyper = _hyper_from_args(args)
    model, _, _ = _train_fold(corpus, args.kind, args.fold, args.folds, args.seed,
                              hyper, args.star_fraction)
    save_model(args.out, model)
    history_path = args.history or (os.path.splitext(args.out)[0] + ".history.csv")
    with open(history_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch,train_loss,valid_accuracy\n")
        for row in model.history:
            fh.write(f"{row['epoch']},{row['train_loss']!r},{row['valid_accuracy']!r}\n")
    print(f"model: {args.out} (best epoch {model.best_epoch}, "
          f"threshold {model.extras['calibration']['threshold']:.4f})")
    print(f"history: {history_path}")
    return 0


def cmd_evaluate(args) -> int:
    corpus = load_recordings(args.corpus)
    hyper = _hyper_from_args(args)
    os.makedirs(args.out_dir, exist_ok=True)
    kinds = ["rnn", "cnn"] if args.kind == "both" else [args.kind]
    reports = {}
    for kind in kinds:
        report = run_cross_validation(corpus, kind, hyper, seed=args.seed,
                                      fold_count=args.folds,
                                      star_fraction=args.star_fraction,
                                      workers=args.workers)
        reports[kind] = report
        for fold in report.folds:
            save_model(os.path.join(args.out_dir, f"{kind}_fold{fold.fold_index}.gsmodel"),
                       fold.model)
        with open(os.path.join(args.out_dir, f"report_{kind}.json"), "w",
                  encoding="utf-8") as fh:
            json.dump(report_to_json_dict(report), fh, indent=2, sort_keys=True)
        emit_quantile_data(report, os.path.join(args.out_dir, f"quantile_{kind}.csv"))
        emit_discriminative_scatter(report,
                                    os.path.join(args.out_dir, f"scatter_{kind}.csv"))
        print(f"{kind}: mean detection rate "
              f"{report.mean_detection_rate():.3f} +- {report.std_detection_rate():.3f}")
    if len(kinds) == 2:
        emit_confusion_comparison(reports["rnn"], reports["cnn"], None,
                                  os.path.join(args.out_dir, "confusion_comparison.csv"))
    print(f"artifacts in {args.out_dir}")
    return 0


def cmd_diagnose(args) -> int:
    model = load_model(args.model)
    if args.session:
        recordings = load_recordings(args.session)
    else:
        if not (args.corpus and args.child_id):
            print("diagnose needs --session or (--corpus and --child-id)", file=sys.stderr)
            return 2
        recordings = [r for r in load_recordings(args.corpus)
                      if r.child_id == args.child_id]
    if not recordings:
        print("no recordings for the requested child", file=sys.stderr)
        return 1
    sessions = sessions_from_recordings(recordings)
    if len(sessions) != 1:
        print(f"expected one child in the session file, found {len(sessions)}",
              file=sys.stderr)
        return 1
    session = sessions[0]
    cal_info = model.extras.get("calibration")
    if cal_info is None:
        print("model container has no embedded calibration", file=sys.stderr)
        return 1
    from .diagnosis import Calibration
    cal = Calibration(threshold=cal_info["threshold"], rate=cal_info["rate"],
                      source=cal_info.get("source", ""))
    subset = None
    if args.subset == "discriminative15":
        stored = model.extras.get("discriminative")
        if not stored:
            print("model container has no discriminative subset", file=sys.stderr)
            return 1
        subset = tuple(stored["subset"])
    score_session(model, session, subset=subset)
    report = diagnose(session, cal, subset=subset)
    payload = json.dumps(report.to_json_dict(), indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(payload + "\n")
    else:
        print(payload)
    return 0


def cmd_rank_glyphs(args) -> int:
    from .diagnosis import glyph_level_means, rank_discriminative
    model = load_model(args.model)
    corpus = load_recordings(args.corpus)
    split_info = model.extras.get("split")
    if split_info is None:
        print("model container lacks split provenance", file=sys.stderr)
        return 1
    valid_ids = set(split_info["validation_children"])
    valid_sessions = sessions_from_recordings(corpus, child_ids=valid_ids)
    dys_sessions = [s for s in sessions_from_recordings(corpus) if s.group == "D"]
    if not dys_sessions:
        print("corpus has no dysgraphic children to rank against", file=sys.stderr)
        return 1
    for s in valid_sessions + dys_sessions:
        score_session(model, s)
    ranking = rank_discriminative(glyph_level_means(valid_sessions, "TD"),
                                  glyph_level_means(dys_sessions, "D"))
    lines = ["glyph,td_mean,dys_mean,gap"]
    lines += [f"{g},{td!r},{dys!r},{gap!r}" for g, td, dys, gap in ranking.rows]
    payload = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(payload)
    else:
        sys.stdout.write(payload)
    return 0


def cmd_serve(args) -> int:
    import uvicorn
    from .service import create_app
    app = create_app(args.model_dir, args.data_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="glyphscreen",
                                     description="Handwriting dysgraphia screening toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="synthesize a glyph corpus")
    p.add_argument("--td", type=int, required=True)
    p.add_argument("--dysgraphic", type=int, required=True)
    p.add_argument("--repetitions", type=int, default=1)
    p.add_argument("--sampling-hz", dest="sampling_hz", type=float, default=200.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train one cross-validation fold")
    p.add_argument("--kind", choices=["rnn", "cnn"], required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--fold", type=int, default=0)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--star-fraction", dest="star_fraction", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.add_argument("--history")
    _add_hyper_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="full cross-validation experiment")
    p.add_argument("--kind", choices=["rnn", "cnn", "both"], default="rnn")
    p.add_argument("--corpus", required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--star-fraction", dest="star_fraction", type=float, default=1.0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    _add_hyper_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("diagnose", help="score one child and emit a report")
    p.add_argument("--model", required=True)
    p.add_argument("--session", help=".glyphs.jsonl with one child's recordings")
    p.add_argument("--corpus")
    p.add_argument("--child-id", dest="child_id")
    p.add_argument("--subset", choices=["full36", "discriminative15"], default="full36")
    p.add_argument("--out")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("rank-glyphs", help="emit the discriminative-glyph ranking")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_rank_glyphs)

    p = sub.add_parser("serve", help="run the screening HTTP service")
    p.add_argument("--model-dir", dest="model_dir", required=True)
    p.add_argument("--data-dir", dest="data_dir", default="sessions")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8631)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
