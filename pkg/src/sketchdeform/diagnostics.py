"""Diagnostic renderings and plain-text exports for inspecting a run."""

from __future__ import annotations

import numpy as np

from .deform import DeltaField
from .imageproc import BinaryImage, Contour
from .raster import GrayImage
from .snake import Snake, SnakePair

__all__ = [
    "binary_to_gray",
    "draw_polyline",
    "contour_overlay",
    "snake_overlay",
    "delta_map",
    "snakes_to_text",
    "rejection_report",
]

# Gray levels for overlays: inputs drawn light, outputs drawn black.
INPUT_LEVEL = 0.7
OUTPUT_LEVEL = 0.0


def binary_to_gray(img: BinaryImage) -> GrayImage:
    """Ink black on white, the same convention the binarizer assumes."""
    return GrayImage(np.where(img.bits, 0.0, 1.0))


def draw_polyline(
    canvas: np.ndarray, points: np.ndarray, value: float, closed: bool = False
) -> None:
    """Stamp a polyline onto a float canvas in place (nearest-pixel strokes)."""
    h, w = canvas.shape
    pts = np.atleast_2d(points)
    n = pts.shape[0]
    if n == 0:
        return
    segs = range(n if closed else n - 1)
    for i in segs:
        a = pts[i]
        b = pts[(i + 1) % n]
        steps = max(int(np.ceil(np.hypot(*(b - a)) * 2.0)), 1)
        for t in np.linspace(0.0, 1.0, steps + 1):
            x = int(round(a[0] + t * (b[0] - a[0])))
            y = int(round(a[1] + t * (b[1] - a[1])))
            if 0 <= x < w and 0 <= y < h:
                canvas[y, x] = value
    if n == 1:
        x, y = int(round(pts[0, 0])), int(round(pts[0, 1]))
        if 0 <= x < w and 0 <= y < h:
            canvas[y, x] = value


def contour_overlay(base: GrayImage, contours: list[Contour]) -> GrayImage:
    canvas = base.pixels.copy()
    for c in contours:
        draw_polyline(canvas, c.points, OUTPUT_LEVEL, c.closed)
    return GrayImage(canvas)


def snake_overlay(base: GrayImage, pairs: list[SnakePair] | tuple[SnakePair, ...]) -> GrayImage:
    """Inputs in light gray, evolved outputs in black, over the reference."""
    canvas = base.pixels.copy()
    for pair in pairs:
        closed = pair.input.mode.value == "periodic"
        draw_polyline(canvas, pair.input.points, INPUT_LEVEL, closed)
    for pair in pairs:
        closed = pair.output.mode.value == "periodic"
        draw_polyline(canvas, pair.output.points, OUTPUT_LEVEL, closed)
    return GrayImage(canvas)


def delta_map(fieldd: DeltaField, width: int, height: int) -> GrayImage:
    """Delta magnitude per pixel scaled by the field's maximum; empty = black."""
    canvas = np.zeros((height, width), dtype=np.float64)
    if fieldd.entries:
        peak = max(np.hypot(dx, dy) for dx, dy in fieldd.entries.values())
        if peak > 0.0:
            for (px, py), (dx, dy) in fieldd.entries.items():
                if 0 <= px < width and 0 <= py < height:
                    canvas[py, px] = np.hypot(dx, dy) / peak
    return GrayImage(canvas)


def snakes_to_text(snakes: list[Snake]) -> str:
    """Plain `x y` rows per snake, snakes separated by blank lines."""
    blocks = []
    for s in snakes:
        blocks.append("\n".join(f"{p[0]:.6f} {p[1]:.6f}" for p in s.points))
    return "\n\n".join(blocks) + ("\n" if blocks else "")


def rejection_report(fieldd: DeltaField) -> str:
    """One `contour point magnitude` row per rejected delta sample."""
    lines = [
        f"{r.contour_index} {r.point_index} {r.magnitude:.6f}"
        for r in fieldd.rejections
    ]
    return "\n".join(lines) + ("\n" if lines else "")
