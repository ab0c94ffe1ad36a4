"""Cross-validation harness: the full screening experiment on one corpus.

For each of the 5 folds: split by child, add star hybrids to the training
recordings, train the recognizer, score every validation and dysgraphic
child, calibrate the threshold on the fold's validation D values, count
dysgraphic detections, and collect the validation confusion matrix plus
the discriminative-glyph ranking. Dysgraphic children are scored by every
fold's model; their D values are averaged across folds for reporting
while detection rates are per fold (then averaged).

Fold training seeds are master_seed + fold_index; the child shuffle uses
master_seed alone so the five validation blocks tile the TD set exactly.
Everything emitted is a deterministic function of (corpus, hyper, seeds).
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .glyphs import REAL_GLYPHS
from .recording import GlyphRecording
from .splits import split_dataset
from .augment import augment_training_set
from .recognizer import (ConfusionMatrix, TrainedRecognizer, TrainingHyper,
                         confusion_matrix, train)
from .diagnosis import (Calibration, DiscriminativeRanking, calibrate_threshold,
                        d_statistic, d_statistic_subset, glyph_level_means,
                        pair_confusion, rank_discriminative, score_session,
                        sessions_from_recordings, subset_for_fold, verdict,
                        SUBSET_SIZE)

FOLD_COUNT = 5


@dataclass
class FoldResult:
    fold_index: int
    model: TrainedRecognizer
    validation_children: tuple
    validation_d: dict[str, float]
    calibration: Calibration
    dysgraphic_d: dict[str, float]
    dysgraphic_verdicts: dict[str, str]
    detection_rate: float
    confusion: ConfusionMatrix
    ranking: DiscriminativeRanking
    validation_glyph_means: dict[str, float]
    dysgraphic_glyph_means: dict[str, float]
    validation_scores: dict[str, dict[str, float]]
    dysgraphic_scores: dict[str, dict[str, float]]


@dataclass
class CVReport:
    kind: str
    seed: int
    hyper: TrainingHyper
    folds: list[FoldResult]
    subset_size: int = SUBSET_SIZE
    fold_subsets: list = field(default_factory=list)
    validation_subset_d: dict[str, float] = field(default_factory=dict)
    dysgraphic_subset_d: dict[str, dict[int, float]] = field(default_factory=dict)

    @property
    def detection_rates(self) -> list[float]:
        return [f.detection_rate for f in self.folds]

    def mean_detection_rate(self) -> float:
        return float(np.mean(self.detection_rates))

    def std_detection_rate(self) -> float:
        return float(np.std(self.detection_rates))

    def dysgraphic_mean_d(self) -> dict[str, tuple[float, float]]:
        """child -> (mean D across folds, std across folds)."""
        out = {}
        children = self.folds[0].dysgraphic_d.keys()
        for cid in children:
            values = [f.dysgraphic_d[cid] for f in self.folds]
            out[cid] = (float(np.mean(values)), float(np.std(values)))
        return out

    def dysgraphic_majority_verdicts(self) -> dict[str, str]:
        out = {}
        for cid in self.folds[0].dysgraphic_d.keys():
            hits = sum(1 for f in self.folds if f.dysgraphic_verdicts[cid] == "dysgraphic")
            out[cid] = "dysgraphic" if hits * 2 > len(self.folds) else "non-dysgraphic"
        return out


def corpus_children(corpus: list[GlyphRecording]) -> list[tuple[str, str]]:
    seen = {}
    for rec in corpus:
        if rec.requested != "*":
            seen.setdefault(rec.child_id, rec.group)
    return list(seen.items())


def _run_fold(corpus, kind, hyper: TrainingHyper, seed: int, fold_index: int,
              fold_count: int, star_fraction: float) -> FoldResult:
    children = corpus_children(corpus)
    split = split_dataset(children, fold_count, fold_index, seed)
    train_recs = [r for r in corpus if r.child_id in split.training_children]
    valid_recs = [r for r in corpus if r.child_id in split.validation_children]
    if not train_recs or not valid_recs:
        raise ValueError(f"fold {fold_index}: empty training or validation split")

    fold_seed = seed + fold_index
    augmented = augment_training_set(train_recs, star_fraction, seed=fold_seed)
    fold_hyper = replace(hyper, seed=fold_seed)
    try:
        model = train(kind, augmented, valid_recs, fold_hyper)
    except Exception as exc:
        raise RuntimeError(f"fold {fold_index}: training failed: {exc}") from exc
    model.extras["split"] = {
        "seed": seed, "fold_index": fold_index, "fold_count": fold_count,
        "validation_children": sorted(split.validation_children),
    }

    valid_sessions = sessions_from_recordings(valid_recs)
    dys_sessions = sessions_from_recordings(
        [r for r in corpus if r.child_id in split.dysgraphic_children])
    for s in valid_sessions + dys_sessions:
        score_session(model, s)

    validation_d = {s.child_id: d_statistic(s) for s in valid_sessions}
    cal = calibrate_threshold(validation_d.values(), source=f"fold{fold_index}")
    dysgraphic_d = {s.child_id: d_statistic(s) for s in dys_sessions}
    verdicts = {cid: verdict(d, cal) for cid, d in dysgraphic_d.items()}
    detection = (sum(1 for v in verdicts.values() if v == "dysgraphic") / len(verdicts)
                 if verdicts else 0.0)

    td_means = glyph_level_means(valid_sessions, "TD")
    dys_means = (glyph_level_means(dys_sessions, "D") if dys_sessions
                 else {g: 0.0 for g in REAL_GLYPHS})
    model.extras["calibration"] = {"threshold": cal.threshold, "rate": cal.rate,
                                   "source": cal.source}
    return FoldResult(
        fold_index=fold_index,
        model=model,
        validation_children=tuple(sorted(split.validation_children)),
        validation_d=validation_d,
        calibration=cal,
        dysgraphic_d=dysgraphic_d,
        dysgraphic_verdicts=verdicts,
        detection_rate=detection,
        confusion=confusion_matrix(model, valid_recs),
        ranking=rank_discriminative(td_means, dys_means),
        validation_glyph_means=td_means,
        dysgraphic_glyph_means=dys_means,
        validation_scores={s.child_id: dict(s.scores) for s in valid_sessions},
        dysgraphic_scores={s.child_id: dict(s.scores) for s in dys_sessions},
    )


_FORK_CORPUS = None


def _fold_worker(args):
    kind, hyper, seed, fold_index, fold_count, star_fraction = args
    return _run_fold(_FORK_CORPUS, kind, hyper, seed, fold_index, fold_count,
                     star_fraction)


def run_cross_validation(corpus: list[GlyphRecording], kind: str,
                         hyper: TrainingHyper | None = None, seed: int = 0,
                         fold_count: int = FOLD_COUNT, star_fraction: float = 1.0,
                         workers: int = 1) -> CVReport:
    """The full experiment; see the module docstring. ``workers`` > 1 runs
    folds in parallel processes (results are merged in fold order, so the
    report does not depend on scheduling)."""
    hyper = hyper or TrainingHyper()
    children = corpus_children(corpus)
    td = [c for c, g in children if g == "TD"]
    dys = [c for c, g in children if g != "TD"]
    if len(td) < fold_count:
        raise ValueError("corpus has fewer TD children than folds")
    if not dys:
        raise ValueError("corpus has no dysgraphic children to evaluate")

    jobs = [(kind, hyper, seed, f, fold_count, star_fraction)
            for f in range(fold_count)]
    if workers > 1 and os.name == "posix":
        global _FORK_CORPUS
        _FORK_CORPUS = corpus
        try:
            import multiprocessing as mp
            with ProcessPoolExecutor(max_workers=workers,
                                     mp_context=mp.get_context("fork")) as pool:
                folds = list(pool.map(_fold_worker, jobs))
        finally:
            _FORK_CORPUS = None
    else:
        folds = [_run_fold(corpus, *job) for job in jobs]

    report = CVReport(kind=kind, seed=seed, hyper=hyper, folds=folds)
    rankings = [f.ranking for f in folds]
    report.fold_subsets = [subset_for_fold(rankings, f, SUBSET_SIZE)
                           for f in range(fold_count)]
    for f, fold in enumerate(folds):
        subset = report.fold_subsets[f]
        for cid, scores in fold.validation_scores.items():
            report.validation_subset_d[cid] = float(
                np.mean([scores[g] for g in subset]))
        for cid, scores in fold.dysgraphic_scores.items():
            report.dysgraphic_subset_d.setdefault(cid, {})[f] = float(
                np.mean([scores[g] for g in subset]))
    return report


def detection_rate(report: CVReport, fold: int) -> float:
    return report.folds[fold].detection_rate


# ------------------------------------------------------------------ emitters

def _fmt(x) -> str:
    return repr(float(x))


def emit_quantile_data(report: CVReport, path) -> None:
    """Quantile-plot data: per-child quantile position and D (mean and std
    across the folds that scored the child - std is 0 for validation
    children, who appear in exactly one fold), plus one threshold row per
    fold. Columns: group,child_id,quantile,d_mean,d_std."""
    lines = ["group,child_id,quantile,d_mean,d_std"]
    val = sorted(((cid, d) for f in report.folds for cid, d in f.validation_d.items()),
                 key=lambda item: (item[1], item[0]))
    for i, (cid, d) in enumerate(val):
        lines.append(f"validation,{cid},{_fmt((i + 0.5) / len(val))},{_fmt(d)},{_fmt(0.0)}")
    dys = sorted(report.dysgraphic_mean_d().items(), key=lambda item: (item[1][0], item[0]))
    for i, (cid, (mean, std)) in enumerate(dys):
        lines.append(f"dysgraphic,{cid},{_fmt((i + 0.5) / len(dys))},{_fmt(mean)},{_fmt(std)}")
    for f in report.folds:
        lines.append(f"threshold,fold{f.fold_index},,{_fmt(f.calibration.threshold)},")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def emit_discriminative_scatter(report: CVReport, path) -> None:
    """Per-glyph difficulty scatter: x = mean dysgraphic score, y = mean
    validation (TD) score, averaged over folds. Columns: glyph,dys_mean,td_mean."""
    lines = ["glyph,dys_mean,td_mean"]
    for g in REAL_GLYPHS:
        dys = float(np.mean([f.dysgraphic_glyph_means[g] for f in report.folds]))
        td = float(np.mean([f.validation_glyph_means[g] for f in report.folds]))
        lines.append(f"{g},{_fmt(dys)},{_fmt(td)}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def scatter_violations(report: CVReport) -> int:
    """How many glyphs are easier for dysgraphic writers (td < dys mean)."""
    count = 0
    for g in REAL_GLYPHS:
        dys = float(np.mean([f.dysgraphic_glyph_means[g] for f in report.folds]))
        td = float(np.mean([f.validation_glyph_means[g] for f in report.folds]))
        if td < dys:
            count += 1
    return count


def aggregate_confusion(report: CVReport) -> ConfusionMatrix:
    total = np.zeros_like(report.folds[0].confusion.counts)
    for f in report.folds:
        total += f.confusion.counts
    return ConfusionMatrix(counts=total)


def emit_confusion_comparison(rnn_report: CVReport, cnn_report: CVReport,
                              pairs=None, path=None, top_k: int = 6) -> list:
    """Pairwise confusion of the two models on fold-aggregated counts for
    the top_k pairs ranked by the image model's confusion (descending,
    ties by lexicographic pair). Columns: pair,rnn_confusion,cnn_confusion."""
    rnn_cm = aggregate_confusion(rnn_report)
    cnn_cm = aggregate_confusion(cnn_report)
    if pairs is None:
        pairs = [(a, b) for i, a in enumerate(REAL_GLYPHS)
                 for b in REAL_GLYPHS[i + 1:]]
    rows = []
    for a, b in pairs:
        a, b = sorted((a, b))
        rows.append((f"{a}/{b}", pair_confusion(rnn_cm, a, b), pair_confusion(cnn_cm, a, b)))
    rows.sort(key=lambda r: (-r[2], r[0]))
    rows = rows[:top_k]
    if path is not None:
        lines = ["pair,rnn_confusion,cnn_confusion"]
        lines += [f"{p},{_fmt(r)},{_fmt(c)}" for p, r, c in rows]
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    return rows


def report_to_json_dict(report: CVReport) -> dict:
    return {
        "kind": report.kind,
        "seed": report.seed,
        "hyper": {k: getattr(report.hyper, k) for k in
                  ("batch_size", "lr", "clip", "patience_epochs", "init_range",
                   "max_epochs", "seed")},
        "detection_rate_mean": report.mean_detection_rate(),
        "detection_rate_std": report.std_detection_rate(),
        "scatter_violations": scatter_violations(report),
        "dysgraphic_majority_verdicts": report.dysgraphic_majority_verdicts(),
        "subset_size": report.subset_size,
        "fold_subsets": [list(s) for s in report.fold_subsets],
        "validation_subset_d": report.validation_subset_d,
        "dysgraphic_subset_d": {cid: {str(f): v for f, v in per.items()}
                                for cid, per in report.dysgraphic_subset_d.items()},
        "folds": [{
            "fold": f.fold_index,
            "validation_children": list(f.validation_children),
            "validation_d": f.validation_d,
            "threshold": f.calibration.threshold,
            "calibration_rate": f.calibration.rate,
            "dysgraphic_d": f.dysgraphic_d,
            "dysgraphic_verdicts": f.dysgraphic_verdicts,
            "detection_rate": f.detection_rate,
            "confusion": f.confusion.counts.tolist(),
            "ranking": [list(r) for r in f.ranking.rows],
            "history": f.model.history,
            "best_epoch": f.model.best_epoch,
        } for f in report.folds],
    }
