#!/usr/bin/env python3
"""Build the cursive glyph template bank (src/glyphscreen/data/templates.json).

Templates are authored here as arcs and line segments in millimeters:
baseline at y=0, x-height 5, ascenders to 9, descenders to -4. Each glyph
is a list of strokes (pen-down polylines); pen-up gaps separate strokes.

Three pairs are deliberately confusable in the final trace:
  o/0 -- same ellipse, opposite drawing direction (0 is also larger,
         which size normalization erases)
  g/9 -- same shape, reversed point order
  e/l -- same loop up to scale, different duration
A static-image model cannot tell these apart; a sequence model can.

Per-stroke durations come from path length at a nominal pen speed and are
quantized to the 20 ms feature grid so that a direction-reversed stroke
resamples to exactly the same point set.
"""

import json
import math
import os

import numpy as np

PEN_SPEED_MM_S = 22.0       # nominal cursive speed
GAP_MS = 120.0              # pen-up travel time between strokes
QUANT_MS = 20.0             # matches the feature resampling period


def arc(cx, cy, rx, ry, deg0, deg1, n=26):
    a = np.linspace(math.radians(deg0), math.radians(deg1), n)
    return np.column_stack([cx + rx * np.cos(a), cy + ry * np.sin(a)])


def line(p0, p1, n=10):
    return np.column_stack([np.linspace(p0[0], p1[0], n), np.linspace(p0[1], p1[1], n)])


def chain(*pieces):
    """Concatenate polyline pieces, dropping duplicated junction points."""
    out = [np.asarray(pieces[0], dtype=float)]
    for piece in pieces[1:]:
        piece = np.asarray(piece, dtype=float)
        if np.allclose(out[-1][-1], piece[0]):
            piece = piece[1:]
        out.append(piece)
    return np.concatenate(out, axis=0)


def bend(p0, p1, sag, n=12):
    """Line p0->p1 bowed sideways by ``sag`` (positive bows left of travel)."""
    p0, p1 = np.asarray(p0, float), np.asarray(p1, float)
    t = np.linspace(0.0, 1.0, n)[:, None]
    base = p0 + t * (p1 - p0)
    d = p1 - p0
    norm = np.hypot(*d)
    perp = np.array([-d[1], d[0]]) / (norm if norm else 1.0)
    return base + np.sin(np.pi * t) * sag * perp


def dot(x, y):
    return np.array([[x, y], [x + 0.12, y + 0.12]])


def scaled(strokes, factor):
    return [s * factor for s in strokes]


def reversed_strokes(strokes):
    return [s[::-1].copy() for s in strokes]


def loop_l():
    """Tall cursive loop; also the 'e' shape after scaling."""
    up = bend((0.0, 0.0), (2.1, 9.0), 0.55, 18)
    crown = arc(1.45, 8.35, 0.95, 0.75, 46, 160, 14)
    down = bend(crown[-1], (1.15, 0.0), -0.35, 18)
    tail = arc(2.05, 0.95, 0.95, 0.95, 198, 300, 10)
    return [chain(up, crown, down, tail)]


def oval_o():
    """Closed ellipse drawn counter-clockwise from the top."""
    return [arc(2.0, 2.5, 1.8, 2.5, 90, 450, 40)]


def bowl_g():
    body = arc(2.0, 2.5, 1.8, 2.5, 55, 415, 34)
    stem = bend(body[-1], (3.45, -2.6), -0.25, 14)
    hook = arc(2.25, -2.65, 1.2, 1.35, 0, -150, 14)
    return [chain(body, stem, hook)]


def build_templates():
    g = {}

    g["a"] = [chain(arc(2.0, 2.5, 1.8, 2.5, 45, 405, 32),
                    bend((3.27, 4.27), (3.75, 0.35), -0.2, 12),
                    arc(4.65, 1.2, 0.95, 0.95, 198, 295, 10))]
    g["b"] = [chain(bend((0.0, 0.0), (1.3, 9.0), 0.5, 18),
                    bend((1.3, 9.0), (0.85, 0.6), -0.25, 16),
                    arc(1.95, 2.1, 1.55, 1.95, 215, 405, 18),
                    line((3.4, 2.6), (3.7, 2.0), 4))]
    g["c"] = [arc(2.0, 2.5, 1.8, 2.4, 48, 312, 28)]
    g["d"] = [chain(arc(2.0, 2.5, 1.8, 2.5, 45, 405, 32),
                    bend((3.27, 4.27), (3.85, 8.2), 0.3, 14),
                    bend((3.85, 8.2), (3.95, 0.4), -0.2, 16),
                    arc(4.85, 1.25, 0.95, 0.95, 198, 290, 10))]
    g["e"] = scaled(loop_l(), 5.0 / 9.0)
    g["f"] = [chain(bend((0.0, 0.0), (1.5, 9.0), 0.6, 18),
                    bend((1.5, 9.0), (0.95, -3.0), -0.4, 22),
                    arc(0.35, -3.0, 0.62, 0.95, 0, -185, 12),
                    line((-0.27, -2.9), (0.4, -0.4), 8))]
    g["g"] = bowl_g()
    g["h"] = [chain(bend((0.0, 0.0), (1.1, 9.0), 0.5, 18),
                    bend((1.1, 9.0), (0.75, 0.4), -0.3, 16),
                    arc(1.95, 2.6, 1.2, 1.95, 180, 15, 16),
                    bend((3.11, 3.1), (3.35, 0.35), 0.0, 10),
                    arc(4.25, 1.2, 0.9, 0.9, 198, 290, 8))]
    g["i"] = [chain(bend((0.0, 0.0), (0.95, 4.5), 0.35, 12),
                    bend((0.95, 4.5), (1.25, 0.35), -0.15, 12),
                    arc(2.15, 1.2, 0.9, 0.9, 198, 290, 8)),
              dot(1.15, 6.6)]
    g["j"] = [chain(bend((0.0, 0.0), (0.95, 4.5), 0.35, 12),
                    bend((0.95, 4.5), (0.85, -2.7), -0.2, 16),
                    arc(-0.35, -2.75, 1.2, 1.3, 0, -160, 12)),
              dot(1.05, 6.6)]
    g["k"] = [chain(bend((0.0, 0.0), (1.1, 9.0), 0.5, 18),
                    bend((1.1, 9.0), (0.75, 0.3), -0.3, 16),
                    line((0.75, 0.3), (0.85, 2.6), 6),
                    arc(2.1, 3.35, 1.25, 0.85, 180, 55, 12),
                    line((2.82, 4.05), (1.6, 2.4), 8),
                    bend((1.6, 2.4), (3.1, 0.25), -0.2, 10),
                    arc(3.95, 1.1, 0.9, 0.9, 198, 285, 8))]
    g["l"] = loop_l()
    g["m"] = [chain(bend((0.0, 0.0), (0.55, 4.3), 0.25, 10),
                    arc(1.15, 3.1, 0.62, 1.25, 165, 15, 12),
                    line((1.75, 3.4), (1.85, 0.35), 8),
                    line((1.85, 0.35), (1.95, 3.35), 6),
                    arc(2.55, 3.1, 0.62, 1.25, 165, 15, 12),
                    line((3.15, 3.4), (3.25, 0.35), 8),
                    line((3.25, 0.35), (3.35, 3.35), 6),
                    arc(3.95, 3.1, 0.62, 1.25, 165, 15, 12),
                    line((4.55, 3.4), (4.6, 0.35), 8),
                    arc(5.5, 1.2, 0.9, 0.9, 198, 285, 8))]
    g["n"] = [chain(bend((0.0, 0.0), (0.55, 4.3), 0.25, 10),
                    arc(1.35, 3.0, 0.82, 1.35, 165, 15, 14),
                    line((2.14, 3.35), (2.25, 0.35), 8),
                    line((2.25, 0.35), (2.4, 3.3), 6),
                    arc(3.2, 3.0, 0.82, 1.35, 165, 15, 14),
                    line((3.99, 3.35), (4.05, 0.35), 8),
                    arc(4.95, 1.2, 0.9, 0.9, 198, 285, 8))]
    g["o"] = oval_o()
    g["p"] = [chain(bend((0.0, 0.0), (0.85, 4.6), 0.35, 12),
                    bend((0.85, 4.6), (1.15, -3.9), -0.25, 20),
                    line((1.15, -3.9), (1.0, 0.1), 10),
                    arc(2.1, 1.1, 1.3, 1.75, 150, -30, 18),
                    line((3.23, 0.22), (3.6, 0.5), 4))]
    g["q"] = [chain(arc(2.0, 2.5, 1.8, 2.5, 45, 405, 32),
                    bend((3.27, 4.27), (3.6, -3.0), -0.2, 18),
                    arc(4.45, -3.0, 0.85, 1.1, 180, 330, 12),
                    line((5.19, -3.55), (5.3, -2.2), 6))]
    g["r"] = [chain(bend((0.0, 0.0), (0.95, 4.6), 0.35, 12),
                    line((0.95, 4.6), (1.05, 3.9), 4),
                    arc(1.8, 3.95, 0.78, 0.75, 160, 15, 12),
                    line((2.55, 4.14), (2.45, 3.4), 4),
                    bend((2.45, 3.4), (2.75, 0.35), -0.15, 10),
                    arc(3.65, 1.2, 0.9, 0.9, 198, 285, 8))]
    g["s"] = [chain(bend((0.0, 0.0), (1.55, 5.0), 0.45, 14),
                    arc(1.05, 4.35, 0.85, 0.8, 52, 175, 10),
                    bend((0.2, 4.4), (0.55, 1.0), 0.3, 12),
                    arc(1.4, 1.15, 0.88, 1.0, 190, 320, 10),
                    arc(2.6, 1.05, 0.75, 0.75, 140, 60, 6))]
    g["t"] = [chain(bend((0.0, 0.0), (1.0, 7.0), 0.4, 16),
                    bend((1.0, 7.0), (1.35, 0.35), -0.2, 14),
                    arc(2.25, 1.2, 0.9, 0.9, 198, 285, 8)),
              line((-0.3, 4.9), (2.5, 5.1), 8)]
    g["u"] = [chain(bend((0.0, 4.5), (0.35, 0.9), -0.1, 10),
                    arc(1.3, 1.05, 0.95, 1.05, 185, 355, 14),
                    line((2.25, 0.96), (2.45, 4.4), 8),
                    line((2.45, 4.4), (2.7, 0.9), 8),
                    arc(3.6, 1.05, 0.9, 1.0, 185, 300, 8))]
    g["v"] = [chain(bend((0.0, 4.5), (0.85, 0.95), 0.15, 12),
                    arc(1.6, 1.1, 0.78, 0.95, 190, 350, 12),
                    bend((2.37, 0.94), (3.15, 4.3), 0.2, 12),
                    arc(3.35, 4.05, 0.45, 0.4, 150, 20, 6))]
    g["w"] = [chain(bend((0.0, 4.5), (0.6, 0.9), 0.1, 10),
                    arc(1.2, 1.0, 0.62, 0.95, 190, 350, 10),
                    line((1.81, 0.84), (2.1, 4.1), 7),
                    line((2.1, 4.1), (2.4, 0.9), 7),
                    arc(3.0, 1.0, 0.62, 0.95, 190, 350, 10),
                    bend((3.61, 0.84), (4.3, 4.4), 0.15, 10),
                    arc(4.5, 4.15, 0.45, 0.4, 150, 20, 6))]
    g["x"] = [bend((0.0, 4.6), (2.3, 0.0), -0.35, 16),
              bend((2.3, 4.6), (0.0, 0.0), 0.35, 16)]
    g["y"] = [chain(bend((0.0, 4.5), (0.4, 0.9), -0.1, 10),
                    arc(1.35, 1.05, 0.95, 1.05, 185, 355, 14),
                    line((2.3, 0.96), (2.5, 4.4), 8),
                    bend((2.5, 4.4), (2.25, -2.8), -0.2, 16),
                    arc(1.05, -2.85, 1.2, 1.3, 0, -160, 12))]
    g["z"] = [chain(arc(0.7, 4.0, 0.7, 0.6, 150, 20, 8),
                    line((1.36, 4.3), (2.25, 4.45), 5),
                    bend((2.25, 4.45), (0.55, 0.45), 0.25, 14),
                    arc(1.2, 0.0, 0.8, 0.55, 135, -60, 10),
                    bend((1.6, -0.48), (0.85, -3.1), -0.2, 10),
                    arc(-0.05, -3.1, 0.9, 1.05, 0, -150, 10))]

    g["0"] = scaled(reversed_strokes(oval_o()), 1.3)
    g["1"] = [chain(line((0.0, 5.4), (0.75, 7.0), 6),
                    line((0.75, 7.0), (0.75, 0.0), 16))]
    g["2"] = [chain(arc(0.95, 5.75, 1.0, 1.2, 160, 10, 14),
                    bend((1.93, 5.96), (0.1, 0.0), -0.35, 16),
                    line((0.1, 0.0), (2.3, 0.1), 10))]
    g["3"] = [chain(arc(0.85, 5.6, 1.05, 1.35, 140, -75, 18),
                    arc(0.95, 1.6, 1.2, 1.65, 75, -140, 20))]
    g["4"] = [chain(line((1.75, 7.0), (0.0, 2.6), 14),
                    line((0.0, 2.6), (2.6, 2.6), 10)),
              line((2.1, 4.6), (2.1, 0.0), 12)]
    g["5"] = [chain(line((2.2, 7.0), (0.55, 7.0), 8),
                    line((0.55, 7.0), (0.4, 4.2), 8),
                    arc(1.25, 2.3, 1.5, 2.0, 105, -160, 20)),
              ]
    g["6"] = [chain(bend((2.3, 7.0), (0.45, 2.3), 0.55, 18),
                    arc(1.45, 1.5, 1.05, 1.45, 180, -180, 24))]
    g["7"] = [chain(line((0.0, 6.9), (2.35, 7.0), 10),
                    bend((2.35, 7.0), (0.85, 0.0), -0.25, 16))]
    g["8"] = [chain(arc(1.2, 5.35, 1.05, 1.45, 55, 235, 18),
                    arc(1.2, 1.75, 1.2, 1.65, 125, -125, 22),
                    arc(1.2, 5.35, 1.05, 1.45, -55, 55, 10))]
    g["9"] = scaled(reversed_strokes(bowl_g()), 0.92)

    return g


def stroke_duration_ms(stroke):
    length = float(np.sum(np.hypot(*np.diff(stroke, axis=0).T)))
    ms = max(length / PEN_SPEED_MM_S * 1000.0, QUANT_MS)
    return float(QUANT_MS * max(1, round(ms / QUANT_MS)))


def main():
    bank = {}
    for glyph, strokes in build_templates().items():
        durations = [stroke_duration_ms(s) for s in strokes]
        total = sum(durations) + GAP_MS * (len(strokes) - 1)
        bank[glyph] = {
            "strokes": [np.round(s, 4).tolist() for s in strokes],
            "stroke_durations_ms": durations,
            "nominal_duration_ms": total,
        }
    out = os.path.join(os.path.dirname(__file__), "..", "src", "glyphscreen", "data",
                       "templates.json")
    out = os.path.normpath(out)
    os.makedirs(os.path.dirname(out), exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(bank, fh, indent=1, sort_keys=True)
    print(f"wrote {out}: {len(bank)} glyphs")


if __name__ == "__main__":
    main()
