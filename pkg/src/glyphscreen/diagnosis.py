"""The D-statistic layer: per-child scoring, threshold calibration,
verdicts, discriminative-glyph analytics and pair confusion.

A child's session holds one recording per requested glyph. The recognizer
assigns each recording the probability of the glyph the child was asked
to write; the unweighted mean of those scores is the D statistic. The
screening threshold is calibrated on typically-developing validation
children so that a fixed fraction (8.6%, the dysgraphia prevalence the
reference test is normed to) falls strictly below it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .glyphs import REAL_GLYPHS, glyph_index
from .recording import GlyphRecording
from .recognizer import ConfusionMatrix, TrainedRecognizer, score_recording

CALIBRATION_RATE = 0.086
SUBSET_SIZE = 15


@dataclass
class ChildSession:
    child_id: str
    group: str                                   # "TD" | "D"
    recordings: dict[str, GlyphRecording]
    scores: dict[str, float] = field(default_factory=dict)
    degenerate: set = field(default_factory=set)  # glyphs scored as uniform


@dataclass(frozen=True)
class Calibration:
    threshold: float
    rate: float = CALIBRATION_RATE
    source: str = ""                             # fold id / provenance note


@dataclass(frozen=True)
class DiagnosisReport:
    child_id: str
    d_value: float
    threshold: float
    verdict: str                                 # "dysgraphic" | "non-dysgraphic"
    scores: dict[str, float]
    subset: tuple                                # glyphs the D was computed over

    def to_json_dict(self) -> dict:
        return {
            "child_id": self.child_id,
            "d_statistic": self.d_value,
            "threshold": self.threshold,
            "verdict": self.verdict,
            "per_glyph_scores": dict(sorted(self.scores.items())),
            "subset": list(self.subset),
        }


@dataclass(frozen=True)
class DiscriminativeRanking:
    """Per-glyph mean scores by group, ordered by how much harder the
    glyph is for impaired writers (descending td_mean - dys_mean gap,
    ties broken by class index)."""

    rows: tuple                                  # of (glyph, td_mean, dys_mean, gap)

    def ordered_glyphs(self) -> tuple:
        return tuple(r[0] for r in self.rows)


def sessions_from_recordings(recordings: list[GlyphRecording],
                             child_ids=None) -> list[ChildSession]:
    """Group a corpus into per-child sessions (first recording per glyph)."""
    by_child: dict[str, ChildSession] = {}
    for rec in recordings:
        if rec.requested == "*":
            continue
        if child_ids is not None and rec.child_id not in child_ids:
            continue
        session = by_child.setdefault(
            rec.child_id, ChildSession(rec.child_id, rec.group, {}))
        session.recordings.setdefault(rec.requested, rec)
    return list(by_child.values())


def score_session(model: TrainedRecognizer, session: ChildSession,
                  subset=None) -> ChildSession:
    """Fill session.scores: scores[g] = P(requested glyph | recording).

    With subset=None all 36 glyphs are required; in subset mode only the
    listed glyphs are scored (and required)."""
    wanted = tuple(subset) if subset is not None else REAL_GLYPHS
    missing = [g for g in wanted if g not in session.recordings]
    if missing:
        raise ValueError(f"session {session.child_id} missing glyphs: {missing}")
    for g in wanted:
        probs, degenerate = score_recording(model, session.recordings[g])
        session.scores[g] = float(probs[glyph_index(g)])
        if degenerate:
            session.degenerate.add(g)
    return session


def d_statistic(session: ChildSession) -> float:
    """Unweighted mean of the 36 per-glyph scores."""
    missing = [g for g in REAL_GLYPHS if g not in session.scores]
    if missing:
        raise ValueError(f"session {session.child_id} lacks scores for: {missing}")
    return float(np.mean([session.scores[g] for g in REAL_GLYPHS]))


def d_statistic_subset(session: ChildSession, subset) -> float:
    """Unweighted mean over a glyph subset (the shortened test)."""
    subset = tuple(subset)
    missing = [g for g in subset if g not in session.scores]
    if missing:
        raise ValueError(f"session {session.child_id} lacks subset scores for: {missing}")
    return float(np.mean([session.scores[g] for g in subset]))


def calibrate_threshold(valid_ds, rate: float = CALIBRATION_RATE,
                        source: str = "") -> Calibration:
    """Threshold = the (k+1)-th smallest validation D, k = round(rate * N).

    With distinct values exactly k validation children fall strictly below
    the threshold. Requires N >= 12 so that k >= 1 at the default rate.
    """
    values = np.sort(np.asarray(list(valid_ds), dtype=np.float64))
    n = len(values)
    if n < 12:
        raise ValueError(f"need at least 12 validation D values, have {n}")
    k = round(rate * n)
    return Calibration(threshold=float(values[k]), rate=rate, source=source)


def verdict(d_value: float, cal: Calibration) -> str:
    """dysgraphic iff D < threshold; a child exactly at the threshold is
    non-dysgraphic (the cut is strict)."""
    return "dysgraphic" if d_value < cal.threshold else "non-dysgraphic"


def diagnose(session: ChildSession, cal: Calibration, subset=None) -> DiagnosisReport:
    if subset is None:
        d = d_statistic(session)
        used = REAL_GLYPHS
    else:
        d = d_statistic_subset(session, subset)
        used = tuple(subset)
    return DiagnosisReport(
        child_id=session.child_id,
        d_value=d,
        threshold=cal.threshold,
        verdict=verdict(d, cal),
        scores={g: session.scores[g] for g in used},
        subset=used,
    )


def glyph_level_means(sessions: list[ChildSession], group: str) -> dict[str, float]:
    """Per-glyph mean score over the children of one group."""
    members = [s for s in sessions if s.group == group]
    if not members:
        raise ValueError(f"no sessions in group {group!r}")
    return {
        g: float(np.mean([s.scores[g] for s in members]))
        for g in REAL_GLYPHS
    }


def rank_discriminative(td_means: dict[str, float],
                        dys_means: dict[str, float]) -> DiscriminativeRanking:
    for name, m in (("td_means", td_means), ("dys_means", dys_means)):
        missing = [g for g in REAL_GLYPHS if g not in m]
        if missing:
            raise ValueError(f"{name} missing glyphs: {missing}")
    rows = [
        (g, td_means[g], dys_means[g], td_means[g] - dys_means[g])
        for g in REAL_GLYPHS
    ]
    rows.sort(key=lambda r: (-r[3], glyph_index(r[0])))
    return DiscriminativeRanking(rows=tuple(rows))


def subset_for_fold(per_fold_rankings: list[DiscriminativeRanking], fold_index: int,
                    k: int = SUBSET_SIZE) -> tuple:
    """Fold i diagnoses with the top-k glyphs of fold (i+1) mod n's ranking,
    so no fold consumes the ranking derived from its own validation set and
    each ranking is used exactly once."""
    if k > len(REAL_GLYPHS):
        raise ValueError(f"subset size {k} exceeds the 36 real glyphs")
    n = len(per_fold_rankings)
    ranking = per_fold_rankings[(fold_index + 1) % n]
    return ranking.ordered_glyphs()[:k]


def pair_confusion(cm: ConfusionMatrix, a: str, b: str) -> float:
    """Average of the two directed misclassification rates between a and b."""
    if a == b:
        raise ValueError("pair confusion needs two distinct glyphs")
    ia, ib = glyph_index(a), glyph_index(b)
    na, nb = cm.row_count(ia), cm.row_count(ib)
    if na == 0 or nb == 0:
        raise ValueError(f"no evaluation examples for pair {a!r}/{b!r}")
    return 0.5 * (cm.counts[ia, ib] / na + cm.counts[ib, ia] / nb)
