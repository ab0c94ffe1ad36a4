"""Star-class augmentation: hybrid non-glyphs that teach rejection.

A hybrid chains together contiguous pieces of two or three real
recordings: the beginning of the first, the middle of the second, the end
of the third. Each appended piece is translated so the trajectory stays
continuous, and timestamps are re-based onto a single monotone clock.
Hybrids are labelled '*', are built from training-set recordings only,
and never enter validation, dysgraphic evaluation, or any D statistic.
"""

from __future__ import annotations

import math

import numpy as np

from .glyphs import STAR
from .recording import GlyphRecording, SamplePoint


def segment_window(length: int, part: int, n_parts: int) -> tuple[int, int]:
    """Contiguous window of ceil(length / n_parts) samples: part 0 anchored
    at the beginning, the last part at the end, middle parts in between."""
    size = math.ceil(length / n_parts)
    if n_parts == 1:
        return 0, size
    start = round(part * (length - size) / (n_parts - 1))
    return start, start + size


def make_star_hybrid(sources: list[GlyphRecording], seed: int = 0) -> GlyphRecording:
    """Combine 2 or 3 recordings into one '*' recording.

    Source i contributes its i-th window (by sample count); windows are
    chained head-to-tail with a translation, so the joins are spatially
    exact. ``seed`` only names the hybrid; the construction itself is
    deterministic in the sources.
    """
    if not 2 <= len(sources) <= 3:
        raise ValueError("a hybrid needs 2 or 3 source recordings")
    for rec in sources:
        if len(rec.samples) < 6:
            raise ValueError("hybrid sources need at least 6 samples")

    n = len(sources)
    samples: list[SamplePoint] = []
    clock = 0.0
    anchor_x = anchor_y = 0.0
    for i, rec in enumerate(sources):
        start, stop = segment_window(len(rec.samples), i, n)
        piece = rec.samples[start:stop]
        t0 = piece[0].t
        if i == 0:
            shift_x = shift_y = 0.0
        else:
            shift_x = anchor_x - piece[0].x
            shift_y = anchor_y - piece[0].y
        for s in piece:
            samples.append(SamplePoint(
                t=clock + (s.t - t0),
                x=s.x + shift_x,
                y=s.y + shift_y,
                pen_down=s.pen_down,
                pressure=s.pressure,
            ))
        anchor_x, anchor_y = samples[-1].x, samples[-1].y
        clock = samples[-1].t + 5.0

    if not any(s.pen_down for s in samples):
        samples[0] = SamplePoint(samples[0].t, samples[0].x, samples[0].y, True,
                                 samples[0].pressure)
    return GlyphRecording(
        child_id=f"star-{seed}",
        group=sources[0].group,
        requested=STAR,
        samples=samples,
        meta=dict(sources[0].meta),
    )


def augment_training_set(train: list[GlyphRecording], star_fraction: float = 1.0,
                         seed: int = 0) -> list[GlyphRecording]:
    """Append floor(star_fraction * len(train) / 36) hybrids built from
    ``train``. The default fraction 1.0 yields one average class worth of
    '*', keeping the 37-class prior near uniform."""
    if not 0.0 <= star_fraction <= 1.0:
        raise ValueError("star_fraction must be in [0, 1]")
    count = int(star_fraction * len(train) / 36)
    if count == 0:
        return list(train)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, 0x57A2))))
    out = list(train)
    eligible = [r for r in train if len(r.samples) >= 6]
    if len(eligible) < 2:
        raise ValueError("not enough eligible recordings to build hybrids")
    for k in range(count):
        n = 2 + int(rng.integers(0, 2))
        picks = [eligible[int(i)] for i in rng.integers(0, len(eligible), size=n)]
        out.append(make_star_hybrid(picks, seed=k))
    return out
