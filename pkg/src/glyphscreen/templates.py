"""Canonical cursive polyline templates for the 36 real glyphs.

The bank ships as packaged JSON (data/templates.json, built by
tools/make_templates.py). Coordinates are millimeters on a baseline at
y=0 with x-height 5. Each template carries per-stroke nominal durations
already quantized to the 20 ms feature grid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .glyphs import REAL_GLYPHS


@dataclass(frozen=True)
class GlyphTemplate:
    glyph: str
    strokes: tuple            # tuple of (K_i, 2) float64 arrays
    stroke_durations_ms: tuple
    nominal_duration_ms: float

    @property
    def control_points(self):
        """Flattened (x, y, pen_down) rows; pen_down is False at the first
        point of every stroke after the first (pen-up travel arrives there)."""
        rows = []
        for i, stroke in enumerate(self.strokes):
            for j, (x, y) in enumerate(stroke):
                rows.append((float(x), float(y), not (i > 0 and j == 0)))
        return rows


def _load_bank() -> dict[str, GlyphTemplate]:
    raw = json.loads(
        resources.files("glyphscreen").joinpath("data/templates.json").read_text("utf-8")
    )
    bank = {}
    for glyph, entry in raw.items():
        strokes = tuple(np.asarray(s, dtype=np.float64) for s in entry["strokes"])
        bank[glyph] = GlyphTemplate(
            glyph=glyph,
            strokes=strokes,
            stroke_durations_ms=tuple(float(d) for d in entry["stroke_durations_ms"]),
            nominal_duration_ms=float(entry["nominal_duration_ms"]),
        )
    return bank


_BANK: dict[str, GlyphTemplate] | None = None


def template_bank() -> dict[str, GlyphTemplate]:
    global _BANK
    if _BANK is None:
        bank = _load_bank()
        missing = [g for g in REAL_GLYPHS if g not in bank]
        if missing:
            raise RuntimeError(f"template bank missing glyphs: {missing}")
        _BANK = bank
    return _BANK


def get_template(glyph: str) -> GlyphTemplate:
    bank = template_bank()
    if glyph not in bank:
        raise KeyError(f"no template for glyph {glyph!r}")
    return bank[glyph]


# Pairs whose final traces coincide by construction; only the stroke
# dynamics (direction or duration) tell them apart.
DESIGNED_LOOKALIKE_PAIRS = (("o", "0"), ("g", "9"), ("e", "l"))
