"""Pen-trajectory recordings and the .glyphs.jsonl file format.

A recording is one timestamped pen trajectory for one requested glyph by
one child. The on-disk format is one JSON object per line:

    {"child_id": str, "group": "TD"|"D", "glyph": "a".."z"|"0".."9"|"*",
     "sampling_hz": number, "resolution_mm": number,
     "samples": [[t_ms, x_mm, y_mm, pen_down(0|1), pressure|null], ...]}

UTF-8, LF line endings. Star-class hybrids reuse the same format with
glyph "*"; files produced by the corpus generator only contain real glyphs.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

from .glyphs import STAR, _INDEX


class RecordingError(ValueError):
    """A recording violates the format or a sample invariant."""


@dataclass(frozen=True, slots=True)
class SamplePoint:
    """One tablet sample: time in ms, position in mm, pen state, optional pressure."""

    t: float
    x: float
    y: float
    pen_down: bool
    pressure: float | None = None


@dataclass
class GlyphRecording:
    """One requested glyph written by one child.

    Invariants (checked on construction): samples non-empty, at least one
    pen-down sample, timestamps non-decreasing overall and strictly
    increasing inside each pen-down stroke.
    """

    child_id: str
    group: str                      # "TD" | "D"
    requested: str                  # glyph code; "*" only via augmentation
    samples: list[SamplePoint]
    meta: dict = field(default_factory=lambda: {"sampling_hz": 200.0, "resolution_mm": 0.25})

    def __post_init__(self):
        if self.group not in ("TD", "D"):
            raise RecordingError(f"unknown group {self.group!r}")
        if self.requested not in _INDEX:
            raise RecordingError(f"unknown glyph {self.requested!r}")
        if not self.samples:
            raise RecordingError("recording has no samples")
        if not any(s.pen_down for s in self.samples):
            raise RecordingError("recording has no pen-down samples")
        prev = None
        for s in self.samples:
            if prev is not None:
                if s.t < prev.t:
                    raise RecordingError("non-monotone t")
                if s.t == prev.t and s.pen_down and prev.pen_down:
                    raise RecordingError("duplicate t inside stroke")
            prev = s

    def strokes(self) -> list[list[SamplePoint]]:
        """Maximal runs of consecutive pen-down samples (pen-up samples dropped)."""
        runs, current = [], []
        for s in self.samples:
            if s.pen_down:
                current.append(s)
            elif current:
                runs.append(current)
                current = []
        if current:
            runs.append(current)
        return runs


def _recording_to_obj(rec: GlyphRecording) -> dict:
    return {
        "child_id": rec.child_id,
        "group": rec.group,
        "glyph": rec.requested,
        "sampling_hz": rec.meta.get("sampling_hz", 200.0),
        "resolution_mm": rec.meta.get("resolution_mm", 0.25),
        "samples": [
            [s.t, s.x, s.y, 1 if s.pen_down else 0, s.pressure] for s in rec.samples
        ],
    }


def _recording_from_obj(obj: dict) -> GlyphRecording:
    samples = [
        SamplePoint(
            t=float(row[0]),
            x=float(row[1]),
            y=float(row[2]),
            pen_down=bool(row[3]),
            pressure=None if row[4] is None else float(row[4]),
        )
        for row in obj["samples"]
    ]
    return GlyphRecording(
        child_id=str(obj["child_id"]),
        group=str(obj["group"]),
        requested=str(obj["glyph"]),
        samples=samples,
        meta={
            "sampling_hz": float(obj["sampling_hz"]),
            "resolution_mm": float(obj["resolution_mm"]),
        },
    )


def parse_recording_file(data: bytes | io.BufferedIOBase) -> list[GlyphRecording]:
    """Parse a .glyphs.jsonl byte stream; errors cite the 1-based line number."""
    if not isinstance(data, bytes):
        data = data.read()
    recordings = []
    for lineno, raw in enumerate(data.decode("utf-8").split("\n"), start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise RecordingError(f"malformed JSON at line {lineno}: {exc.msg}") from exc
        try:
            recordings.append(_recording_from_obj(obj))
        except RecordingError as exc:
            raise RecordingError(f"{exc.args[0]} at line {lineno}") from exc
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise RecordingError(f"malformed recording at line {lineno}: {exc}") from exc
    return recordings


def serialize_recordings(recordings: list[GlyphRecording]) -> bytes:
    """Inverse of parse_recording_file; parse(serialize(x)) == x field-for-field."""
    lines = [json.dumps(_recording_to_obj(rec), separators=(",", ":")) for rec in recordings]
    return ("\n".join(lines) + "\n" if lines else "").encode("utf-8")


def load_recordings(path) -> list[GlyphRecording]:
    with open(path, "rb") as fh:
        return parse_recording_file(fh.read())


def save_recordings(path, recordings: list[GlyphRecording]) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_recordings(recordings))


def is_star(rec: GlyphRecording) -> bool:
    return rec.requested == STAR
