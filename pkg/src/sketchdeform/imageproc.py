"""Sketch preprocessing and contour extraction.

The preprocessing chain mirrors how a scanned pencil sketch becomes snake
seeds: binarize (ink = dark), close small stroke gaps morphologically, thin
to single-pixel strokes, then trace iso-contours of the binary field with
marching squares at level 0.5.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ImageError
from .raster import GrayImage

__all__ = [
    "BinaryImage",
    "Contour",
    "binarize",
    "close_gaps",
    "thin",
    "extract_contours",
    "sobel_xy",
    "gradient_magnitude",
]


@dataclass(frozen=True)
class BinaryImage:
    """Row-major bit raster; True marks ink/foreground."""

    bits: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(np.atleast_2d(self.bits), dtype=bool)
        arr.setflags(write=False)
        object.__setattr__(self, "bits", arr)

    @property
    def width(self) -> int:
        return int(self.bits.shape[1])

    @property
    def height(self) -> int:
        return int(self.bits.shape[0])

    def count(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True)
class Contour:
    """Ordered sub-pixel polyline; closed means the ends wrap around."""

    points: np.ndarray  # (n, 2) of (x, y)
    closed: bool

    def __post_init__(self):
        arr = np.ascontiguousarray(np.atleast_2d(self.points), dtype=np.float64)
        arr.setflags(write=False)
        object.__setattr__(self, "points", arr)

    def __len__(self) -> int:
        return int(self.points.shape[0])


def binarize(img: GrayImage, threshold: float = 0.5) -> BinaryImage:
    """Ink = dark: a pixel is foreground iff intensity < threshold."""
    if not 0.0 < threshold < 1.0:
        raise ImageError(f"threshold must be in (0, 1), got {threshold}")
    return BinaryImage(img.pixels < threshold)


def _dilate_grow(bits: np.ndarray, k: int) -> np.ndarray:
    """Dilate by the square SE anchored at offsets {0..k-1}^2, growing the canvas."""
    h, w = bits.shape
    out = np.zeros((h + k - 1, w + k - 1), dtype=bool)
    for dy in range(k):
        for dx in range(k):
            out[dy : dy + h, dx : dx + w] |= bits
    return out


def _erode_shrink(big: np.ndarray, k: int) -> np.ndarray:
    """Erode by the same SE, shrinking the canvas back to the original size."""
    h = big.shape[0] - (k - 1)
    w = big.shape[1] - (k - 1)
    out = np.ones((h, w), dtype=bool)
    for dy in range(k):
        for dx in range(k):
            out &= big[dy : dy + h, dx : dx + w]
    return out


def close_gaps(img: BinaryImage, se_side: int = 2) -> BinaryImage:
    """Morphological closing with a square structuring element.

    Dilation and erosion use the same anchored element, so the pair is a
    proper adjunction: closing is extensive (never loses input ink) and
    idempotent. Everything outside the canvas counts as background; the
    dilation works on a grown canvas so border ink erodes correctly.
    """
    if se_side < 1:
        raise ImageError(f"se_side must be >= 1, got {se_side}")
    if se_side == 1 or img.width == 0 or img.height == 0:
        return img
    return BinaryImage(_erode_shrink(_dilate_grow(img.bits, se_side), se_side))


def _thin_pass(bits: np.ndarray) -> np.ndarray:
    """One two-subiteration parallel thinning pass (Zhang-Suen)."""
    for phase in (0, 1):
        padded = np.pad(bits, 1, mode="constant", constant_values=False)
        # Neighbors clockwise from north: P2..P9.
        p = [
            padded[0:-2, 1:-1],  # P2 north
            padded[0:-2, 2:],    # P3 north-east
            padded[1:-1, 2:],    # P4 east
            padded[2:, 2:],      # P5 south-east
            padded[2:, 1:-1],    # P6 south
            padded[2:, 0:-2],    # P7 south-west
            padded[1:-1, 0:-2],  # P8 west
            padded[0:-2, 0:-2],  # P9 north-west
        ]
        b = np.zeros(bits.shape, dtype=np.int32)
        for q in p:
            b += q
        a = np.zeros(bits.shape, dtype=np.int32)
        for i in range(8):
            a += (~p[i] & p[(i + 1) % 8]).astype(np.int32)
        if phase == 0:
            cond = ~(p[0] & p[2] & p[4]) & ~(p[2] & p[4] & p[6])
        else:
            cond = ~(p[0] & p[2] & p[6]) & ~(p[0] & p[4] & p[6])
        remove = bits & (b >= 2) & (b <= 6) & (a == 1) & cond
        bits = bits & ~remove
    return bits


def thin(img: BinaryImage, iterations: int = 1) -> BinaryImage:
    """Run the stated number of thinning passes; 0 is the identity.

    Each pass peels one layer of removable boundary pixels from both sides
    while preserving 8-connectivity; endpoints and isolated pixels survive.
    Stops early once a pass changes nothing.
    """
    if iterations < 0:
        raise ImageError(f"iterations must be >= 0, got {iterations}")
    bits = img.bits
    for _ in range(iterations):
        new = _thin_pass(bits)
        if np.array_equal(new, bits):
            break
        bits = new
    return BinaryImage(bits)


# Marching-squares segment table. Corner bits: 1 = top-left, 2 = top-right,
# 4 = bottom-right, 8 = bottom-left (inside = foreground). Edges are named by
# their midpoint offset from the cell's top-left corner (units of pixels).
_EDGE_T = (0.5, 0.0)
_EDGE_R = (1.0, 0.5)
_EDGE_B = (0.5, 1.0)
_EDGE_L = (0.0, 0.5)

_MS_SEGMENTS: dict[int, tuple[tuple[tuple[float, float], tuple[float, float]], ...]] = {
    0: (),
    1: ((_EDGE_L, _EDGE_T),),
    2: ((_EDGE_T, _EDGE_R),),
    3: ((_EDGE_L, _EDGE_R),),
    4: ((_EDGE_R, _EDGE_B),),
    5: ((_EDGE_T, _EDGE_R), (_EDGE_L, _EDGE_B)),  # saddle, center resolved foreground
    6: ((_EDGE_T, _EDGE_B),),
    7: ((_EDGE_L, _EDGE_B),),
    8: ((_EDGE_L, _EDGE_B),),
    9: ((_EDGE_T, _EDGE_B),),
    10: ((_EDGE_L, _EDGE_T), (_EDGE_R, _EDGE_B)),  # saddle, center resolved foreground
    11: ((_EDGE_R, _EDGE_B),),
    12: ((_EDGE_L, _EDGE_R),),
    13: ((_EDGE_T, _EDGE_R),),
    14: ((_EDGE_L, _EDGE_T),),
    15: (),
}


def _key(x: float, y: float) -> tuple[int, int]:
    # Crossings sit on half-integers; doubling gives exact integer keys.
    return int(round(2.0 * x)), int(round(2.0 * y))


def extract_contours(img: BinaryImage) -> list[Contour]:
    """Trace iso-contours of the 0/1 field at level 0.5.

    With binary corner values every crossing lands on an edge midpoint, so
    segment endpoints link exactly. Saddle cells (both diagonals) use the
    cell-center average; for a binary saddle that average is exactly 0.5 and
    resolves to foreground, which keeps 8-connected diagonal strokes joined
    (consistent with the thinning step's connectivity). Chains of linked
    segments become contours: open chains first (sorted by start key), then
    remaining cycles, both deterministic. Contours of fewer than 2 points are
    dropped.
    """
    bits = img.bits
    h, w = bits.shape
    if h < 2 or w < 2 or not bits.any():
        return []

    # Vectorized case index per cell.
    tl = bits[:-1, :-1]
    tr = bits[:-1, 1:]
    br = bits[1:, 1:]
    bl = bits[1:, :-1]
    case = (
        tl.astype(np.int8)
        + 2 * tr.astype(np.int8)
        + 4 * br.astype(np.int8)
        + 8 * bl.astype(np.int8)
    )
    ys, xs = np.nonzero((case > 0) & (case < 15))

    segments: list[tuple[tuple[int, int], tuple[int, int]]] = []
    for cy, cx in zip(ys.tolist(), xs.tolist()):
        for (ax, ay), (bx, by) in _MS_SEGMENTS[int(case[cy, cx])]:
            segments.append((_key(cx + ax, cy + ay), _key(cx + bx, cy + by)))
    if not segments:
        return []

    adj: dict[tuple[int, int], list[int]] = {}
    for idx, (a, b) in enumerate(segments):
        adj.setdefault(a, []).append(idx)
        adj.setdefault(b, []).append(idx)

    used = [False] * len(segments)

    def walk(start: tuple[int, int]) -> list[tuple[int, int]]:
        chain = [start]
        node = start
        while True:
            nxt = None
            for idx in adj[node]:
                if not used[idx]:
                    used[idx] = True
                    a, b = segments[idx]
                    nxt = b if node == a else a
                    break
            if nxt is None:
                return chain
            chain.append(nxt)
            node = nxt

    contours: list[Contour] = []

    def emit(chain: list[tuple[int, int]]) -> None:
        closed = len(chain) > 2 and chain[0] == chain[-1]
        if closed:
            chain = chain[:-1]
        if len(chain) < 2:
            return
        pts = np.array(chain, dtype=np.float64) / 2.0
        contours.append(Contour(pts, closed))

    # Open chains start at degree-1 nodes; visit them in sorted key order.
    for node in sorted(k for k, lst in adj.items() if len(lst) == 1):
        if all(used[i] for i in adj[node]):
            continue
        emit(walk(node))
    # Whatever remains sits on cycles; start each at its lowest segment index.
    for idx in range(len(segments)):
        if not used[idx]:
            emit(walk(segments[idx][0]))

    return contours


_SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
_SOBEL_Y = np.array([[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]])


def sobel_xy(img: GrayImage) -> tuple[np.ndarray, np.ndarray]:
    """Raw Sobel responses (gx, gy) with replicate-padded borders."""
    if img.width < 3 or img.height < 3:
        raise ImageError(f"need at least 3x3 for gradients, got {img.width}x{img.height}")
    padded = np.pad(img.pixels, 1, mode="edge")
    gx = np.zeros_like(img.pixels)
    gy = np.zeros_like(img.pixels)
    h, w = img.pixels.shape
    for dy in range(3):
        for dx in range(3):
            block = padded[dy : dy + h, dx : dx + w]
            if _SOBEL_X[dy, dx] != 0.0:
                gx = gx + _SOBEL_X[dy, dx] * block
            if _SOBEL_Y[dy, dx] != 0.0:
                gy = gy + _SOBEL_Y[dy, dx] * block
    return gx, gy


def gradient_magnitude(img: GrayImage) -> GrayImage:
    """Sobel gradient magnitude scaled into [0, 1] by the image maximum."""
    gx, gy = sobel_xy(img)
    mag = np.hypot(gx, gy)
    peak = float(mag.max())
    if peak > 0.0:
        mag = mag / peak
    return GrayImage(mag)
