"""Synthetic handwriting corpus with controllable writer impairment.

Real child data cannot be redistributed, so experiments run on synthetic
writers. A writer is a bundle of motor parameters; an impaired writer
degrades legibility the way the screening pipeline must detect: tremor
(visible in the final trace) plus stroke-order reversals and erratic
tempo (invisible in the trace, glaring in the dynamics).

All randomness flows through numpy's PCG64 via SeedSequence so corpora
are bit-identical across runs and platforms for a given master seed.
Independent child streams per noise source mean that switching one
impairment on or off never shifts the draws of another.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .recording import GlyphRecording, SamplePoint, serialize_recordings
from .glyphs import REAL_GLYPHS, is_real_glyph
from .templates import get_template

GAP_MS = 120.0           # pen-up travel between strokes
RESOLUTION_MM = 0.25     # recorded as metadata only; samples are not quantized

# Default profile ranges. TD writers must stay within the certification
# envelope (tremor <= 0.3 mm, no drops, no reversals); impaired writers
# must exceed at least one impairment floor - here reversal_prob >= 0.15.
# Impairment is deliberately dynamics-heavy (reversals, erratic tempo)
# with only a mild static residue (tremor overlapping the TD range, rare
# stroke drops): the final trace stays near-legible while the movement
# that produced it is disturbed.
TD_TREMOR_MM = (0.04, 0.28)
TD_SPEED_JITTER = (0.02, 0.14)
DYS_TREMOR_MM = (0.08, 0.3)
DYS_SPEED_JITTER = (0.3, 0.5)
DYS_DROP_PROB = (0.0, 0.03)
DYS_REVERSAL_PROB = (0.45, 0.7)
WOBBLE_HZ = (3.0, 8.0)

# Per-writer style, drawn from the same distribution for both groups:
# handwriting slant and letter proportions vary between children whether
# or not they are impaired.
STYLE_SLANT_DEG = (-12.0, 12.0)
STYLE_ASPECT = (0.82, 1.22)


@dataclass(frozen=True)
class WriterProfile:
    writer_id: str
    group: str                       # "TD" | "D"
    tremor_amp: float                # mm
    wobble_hz: float
    segment_drop_prob: float
    direction_reversal_prob: float
    speed_jitter: float
    seed: int
    slant_deg: float = 0.0           # style, independent of impairment
    aspect: float = 1.0

    def __post_init__(self):
        if self.group == "TD":
            ok = (self.tremor_amp <= 0.3 and self.segment_drop_prob == 0.0
                  and self.direction_reversal_prob == 0.0)
            if not ok:
                raise ValueError("TD profile outside the typically-developing envelope")
        else:
            ok = (self.tremor_amp >= 0.8 or self.segment_drop_prob >= 0.15
                  or self.direction_reversal_prob >= 0.15)
            if not ok:
                raise ValueError("dysgraphic profile below every impairment floor")


@dataclass(frozen=True)
class CorpusConfig:
    td_count: int
    dysgraphic_count: int
    repetitions_per_glyph: int = 1
    sampling_hz: float = 200.0
    master_seed: int = 0

    def __post_init__(self):
        if self.td_count < 0 or self.dysgraphic_count < 0:
            raise ValueError("writer counts must be >= 0")


def _quantize_ms(ms: float, quantum: float = 20.0) -> float:
    return quantum * max(1, round(ms / quantum))


def _arclength_position(stroke: np.ndarray, frac: np.ndarray) -> np.ndarray:
    """Positions along a polyline at fractional arc lengths in [0, 1]."""
    deltas = np.diff(stroke, axis=0)
    seg = np.hypot(deltas[:, 0], deltas[:, 1])
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    if total == 0.0:
        return np.repeat(stroke[:1], len(frac), axis=0)
    s = frac * total
    x = np.interp(s, cum, stroke[:, 0])
    y = np.interp(s, cum, stroke[:, 1])
    return np.column_stack([x, y])


def synthesize_glyph(profile: WriterProfile, glyph: str, instance_seed: int,
                     sampling_hz: float = 200.0) -> GlyphRecording:
    """Render one glyph for one writer, deterministically.

    The template path is traversed at the writer's tempo (a global duration
    factor plus a smooth in-stroke time warp controlled by speed_jitter),
    sampled at sampling_hz, then perturbed by a sinusoidal tremor of
    amplitude tremor_amp at wobble_hz plus white noise of 0.1*tremor_amp.
    Whole strokes may be dropped or direction-reversed (same trace, new
    dynamics). Stroke durations stay on the 20 ms grid so a reversed stroke
    resamples to exactly the same trace points downstream.
    """
    if not is_real_glyph(glyph):
        raise ValueError(f"cannot synthesize glyph {glyph!r}")
    template = get_template(glyph)

    streams = np.random.SeedSequence((profile.seed, instance_seed)).spawn(5)
    rng_tempo = np.random.Generator(np.random.PCG64(streams[0]))
    rng_tremor = np.random.Generator(np.random.PCG64(streams[1]))
    rng_noise = np.random.Generator(np.random.PCG64(streams[2]))
    rng_drop = np.random.Generator(np.random.PCG64(streams[3]))
    rng_reverse = np.random.Generator(np.random.PCG64(streams[4]))

    period_ms = 1000.0 / sampling_hz
    duration_factor = 1.0 + profile.speed_jitter * rng_tempo.uniform(-1.0, 1.0)
    warp_phases = rng_tempo.uniform(0.0, 2.0 * np.pi, size=len(template.strokes))
    tremor_phases = rng_tremor.uniform(0.0, 2.0 * np.pi, size=(len(template.strokes), 2))
    drop_flags = rng_drop.random(len(template.strokes)) < profile.segment_drop_prob
    reverse_flags = rng_reverse.random(len(template.strokes)) < profile.direction_reversal_prob
    shear = np.tan(np.radians(profile.slant_deg))

    if drop_flags.all():
        # never drop every stroke; keep the longest one
        lengths = [float(np.sum(np.hypot(*np.diff(s, axis=0).T))) for s in template.strokes]
        drop_flags[int(np.argmax(lengths))] = False

    samples: list[SamplePoint] = []
    clock_ms = 0.0
    first = True
    for k, raw_stroke in enumerate(template.strokes):
        if drop_flags[k]:
            continue
        stroke = raw_stroke.copy()
        stroke[:, 1] *= profile.aspect
        stroke[:, 0] += shear * stroke[:, 1]
        duration = _quantize_ms(template.stroke_durations_ms[k] * duration_factor)
        n = int(round(duration / period_ms)) + 1
        t_local = np.arange(n) * period_ms
        frac = t_local / duration
        # smooth monotone time warp; derivative stays positive for jitter < 1
        amp = min(profile.speed_jitter, 0.95)
        warped = frac + amp * np.sin(2.0 * np.pi * 2.0 * frac + warp_phases[k]) / (2.0 * np.pi * 2.0)
        warped = np.clip(warped - warped[0], 0.0, None)
        if warped[-1] > 0:
            warped /= warped[-1]
        pts = _arclength_position(stroke, warped)

        t_abs = clock_ms + t_local
        if profile.tremor_amp > 0.0:
            w = 2.0 * np.pi * profile.wobble_hz * (t_abs / 1000.0)
            pts = pts + profile.tremor_amp * np.column_stack([
                np.sin(w + tremor_phases[k, 0]),
                np.sin(w + tremor_phases[k, 1]),
            ])
            pts = pts + rng_noise.normal(0.0, 0.1 * profile.tremor_amp, size=pts.shape)
        if reverse_flags[k]:
            pts = pts[::-1]

        if not first:
            samples.append(SamplePoint(t=clock_ms - GAP_MS / 2.0,
                                       x=float(pts[0, 0]), y=float(pts[0, 1]),
                                       pen_down=False))
        for t, (x, y) in zip(t_abs, pts):
            samples.append(SamplePoint(t=float(t), x=float(x), y=float(y), pen_down=True))
        clock_ms = t_abs[-1] + GAP_MS
        first = False

    return GlyphRecording(
        child_id=profile.writer_id,
        group=profile.group,
        requested=glyph,
        samples=samples,
        meta={"sampling_hz": sampling_hz, "resolution_mm": RESOLUTION_MM},
    )


def _profile_for(writer_id: str, group: str, seq: np.random.SeedSequence) -> WriterProfile:
    children = seq.spawn(2)
    rng = np.random.Generator(np.random.PCG64(children[0]))
    seed = int(children[1].generate_state(1)[0])
    style = {"slant_deg": float(rng.uniform(*STYLE_SLANT_DEG)),
             "aspect": float(rng.uniform(*STYLE_ASPECT))}
    if group == "TD":
        return WriterProfile(
            writer_id=writer_id, group="TD",
            tremor_amp=float(rng.uniform(*TD_TREMOR_MM)),
            wobble_hz=float(rng.uniform(*WOBBLE_HZ)),
            segment_drop_prob=0.0,
            direction_reversal_prob=0.0,
            speed_jitter=float(rng.uniform(*TD_SPEED_JITTER)),
            seed=seed,
            **style,
        )
    return WriterProfile(
        writer_id=writer_id, group="D",
        tremor_amp=float(rng.uniform(*DYS_TREMOR_MM)),
        wobble_hz=float(rng.uniform(*WOBBLE_HZ)),
        segment_drop_prob=float(rng.uniform(*DYS_DROP_PROB)),
        direction_reversal_prob=float(rng.uniform(*DYS_REVERSAL_PROB)),
        speed_jitter=float(rng.uniform(*DYS_SPEED_JITTER)),
        seed=seed,
        **style,
    )


def corpus_profiles(config: CorpusConfig) -> list[WriterProfile]:
    """Writer profiles implied by a corpus config (TD writers first)."""
    root = np.random.SeedSequence((config.master_seed, 0xC0))
    td_seqs = root.spawn(config.td_count + config.dysgraphic_count)
    profiles = []
    for i in range(config.td_count):
        profiles.append(_profile_for(f"td{i:04d}", "TD", td_seqs[i]))
    for j in range(config.dysgraphic_count):
        profiles.append(_profile_for(f"dys{j:04d}", "D", td_seqs[config.td_count + j]))
    return profiles


def generate_corpus(config: CorpusConfig) -> list[GlyphRecording]:
    """All recordings for a corpus: every writer writes every glyph,
    repetitions_per_glyph times. Ordering and seeds are fixed functions of
    the config, so the output is bit-identical for identical configs."""
    recordings = []
    for profile in corpus_profiles(config):
        for g_index, glyph in enumerate(REAL_GLYPHS):
            for rep in range(config.repetitions_per_glyph):
                instance_seed = g_index * 1000 + rep
                recordings.append(
                    synthesize_glyph(profile, glyph, instance_seed,
                                     sampling_hz=config.sampling_hz)
                )
    return recordings


def corpus_manifest(config: CorpusConfig, recordings: list[GlyphRecording]) -> dict:
    payload = serialize_recordings(recordings)
    return {
        "format": "glyphscreen-corpus-manifest",
        "version": 1,
        "config": {
            "td_count": config.td_count,
            "dysgraphic_count": config.dysgraphic_count,
            "repetitions_per_glyph": config.repetitions_per_glyph,
            "sampling_hz": config.sampling_hz,
            "master_seed": config.master_seed,
        },
        "recordings": len(recordings),
        "sha256": hashlib.sha256(payload).hexdigest(),
        "prng": "numpy PCG64 via SeedSequence",
    }
