"""Preprocessing: recordings -> normalized trajectories -> model inputs.

The recognizers must be position and size invariant, so every recording is
reduced to a canonical form first: strokes are resampled on a uniform 20 ms
grid (linear interpolation inside a stroke, never across pen-up gaps), the
ink centroid is moved to the origin and coordinates are scaled so the
largest absolute coordinate is 1.

From the canonical form two representations are derived: a (dx, dy, pen)
step sequence for the sequence model and a small anti-aliased grayscale
image of the final trace for the image baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .recording import GlyphRecording

STEP_MS = 20.0       # resampling period
L_MAX = 256          # sequence-length cap; longer inputs are uniformly subsampled
IMAGE_SIZE = 28
IMAGE_MARGIN = 2     # pixels of blank border around the ink


class DegenerateTrajectoryError(ValueError):
    """All ink collapses to a single point; no direction or shape to encode."""


@dataclass
class NormalizedTrajectory:
    """Canonical trajectory: points (L, 2) in [-1, 1], ink centroid at origin.

    ``pen_down[i]`` says whether the segment arriving at point i was drawn;
    it is False exactly at the first point of each stroke after the first.
    Every point itself is an ink location (hover samples are dropped earlier).
    """

    points: np.ndarray        # (L, 2) float64
    pen_down: np.ndarray      # (L,) bool
    step_ms: float = STEP_MS


@dataclass
class FeatureSequence:
    """Step encoding (dx, dy, pen) of a normalized trajectory, length <= L_MAX."""

    rows: np.ndarray          # (L, 3) float64; column 2 is 0/1


@dataclass
class GlyphImage:
    """S x S grayscale raster of the final trace, values in [0, 1], max = 1."""

    pixels: np.ndarray        # (S, S) float64


def _resample_stroke(stroke, step_ms: float) -> np.ndarray:
    """Sample a stroke at t0, t0+step, ... by linear interpolation; (K, 2)."""
    t = np.array([s.t for s in stroke], dtype=np.float64)
    xy = np.array([[s.x, s.y] for s in stroke], dtype=np.float64)
    span = t[-1] - t[0]
    count = int(np.floor(span / step_ms)) + 1
    grid = t[0] + step_ms * np.arange(count)
    out = np.empty((count, 2))
    out[:, 0] = np.interp(grid, t, xy[:, 0])
    out[:, 1] = np.interp(grid, t, xy[:, 1])
    return out


def normalize(rec: GlyphRecording, step_ms: float = STEP_MS) -> NormalizedTrajectory:
    """Resample, center and scale a recording.

    Requires at least 2 pen-down samples. Raises DegenerateTrajectoryError
    when every sample sits on the same point.
    """
    strokes = rec.strokes()
    n_pen = sum(len(s) for s in strokes)
    if n_pen < 2:
        raise DegenerateTrajectoryError("fewer than 2 pen-down samples")

    pieces = [_resample_stroke(s, step_ms) for s in strokes]
    points = np.concatenate(pieces, axis=0)
    pen = np.ones(len(points), dtype=bool)
    start = 0
    for i, piece in enumerate(pieces):
        if i > 0:
            pen[start] = False
        start += len(piece)

    centroid = points.mean(axis=0)
    points = points - centroid
    scale = np.abs(points).max()
    if scale <= 0.0:
        raise DegenerateTrajectoryError("all samples at one point")
    points /= scale
    return NormalizedTrajectory(points=points, pen_down=pen, step_ms=step_ms)


def to_sequence_features(traj: NormalizedTrajectory, l_max: int = L_MAX) -> FeatureSequence:
    """Encode a trajectory as rows (dx, dy, pen); cumulative sum of the
    deltas reconstructs the trajectory relative to its first point.

    Trajectories longer than l_max keep l_max points picked uniformly
    (always including both endpoints) before the deltas are taken, so the
    reconstructed endpoint is preserved.
    """
    pts = traj.points
    pen = traj.pen_down
    if len(pts) > l_max:
        keep = np.round(np.linspace(0, len(pts) - 1, l_max)).astype(int)
        pts = pts[keep]
        pen = pen[keep]
    rows = np.zeros((len(pts), 3))
    rows[1:, :2] = np.diff(pts, axis=0)
    rows[:, 2] = pen.astype(np.float64)
    return FeatureSequence(rows=rows)


def _segments(traj: NormalizedTrajectory):
    """Drawn segments as ((x0,y0),(x1,y1)) pairs, plus all ink points."""
    pts = traj.points
    segs = [
        (pts[i - 1], pts[i])
        for i in range(1, len(pts))
        if traj.pen_down[i]
    ]
    return segs, pts


def _point_segment_distance(px, py, a, b):
    """Vectorized distance from grid points (px, py) to segment a-b."""
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.hypot(px - a[0], py - a[1])
    t = ((px - a[0]) * ab[0] + (py - a[1]) * ab[1]) / denom
    t = np.clip(t, 0.0, 1.0)
    cx = a[0] + t * ab[0]
    cy = a[1] + t * ab[1]
    return np.hypot(px - cx, py - cy)


def rasterize(traj: NormalizedTrajectory, size: int = IMAGE_SIZE) -> GlyphImage:
    """Draw the final trace into a size x size grid.

    Drawn segments become 1-pixel-wide anti-aliased lines: each pixel takes
    max(0, 1 - d) where d is its center's distance (in pixels) to the
    nearest ink, accumulated with max over segments. Isolated points (the
    dot of an 'i') are stamped the same way. The result is max-normalized.
    """
    if size < 8:
        raise ValueError("image size must be >= 8")
    box = size - 1 - 2 * IMAGE_MARGIN
    # [-1, 1] -> pixel coordinates; y flipped so positive y is up on screen
    def to_px(p):
        return np.array([
            IMAGE_MARGIN + (p[0] + 1.0) / 2.0 * box,
            IMAGE_MARGIN + (1.0 - p[1]) / 2.0 * box,
        ])

    cols, rows_grid = np.meshgrid(np.arange(size, dtype=np.float64),
                                  np.arange(size, dtype=np.float64))
    img = np.zeros((size, size))
    segs, pts = _segments(traj)
    for a, b in segs:
        d = _point_segment_distance(cols, rows_grid, to_px(a), to_px(b))
        np.maximum(img, 1.0 - d, out=img)
    for p in pts:
        q = to_px(p)
        d = np.hypot(cols - q[0], rows_grid - q[1])
        np.maximum(img, 1.0 - d, out=img)
    np.clip(img, 0.0, None, out=img)
    peak = img.max()
    if peak > 0:
        img /= peak
    return GlyphImage(pixels=img)
