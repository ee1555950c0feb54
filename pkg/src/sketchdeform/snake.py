"""Active contours: force fields, the semi-implicit evolver, and batching.

A snake is an ordered chain of sub-pixel points that iteratively minimizes
internal bending/stretching energy plus an external image energy. The image
term F = w_brightness*I + w_edge*G is built once per reference image; snakes
ascend F, so negative w_brightness pulls them toward dark strokes and
positive w_edge toward strong edges.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SnakeError
from .imageproc import Contour, gradient_magnitude
from .kernels import snake_evolve as _kernel_evolve
from .raster import GrayImage

__all__ = [
    "SnakeMode",
    "SoftCurve",
    "Snake",
    "Tweakables",
    "ForceField",
    "build_force_field",
    "evolve_snake",
    "evolve_snake_stats",
    "SnakePair",
    "SkipReport",
    "RunSnakesResult",
    "run_snakes",
    "CONVERGENCE_WINDOW",
]

# Convergence compares the current configuration against this many previous
# ones; the closest match must move less than the threshold.
CONVERGENCE_WINDOW = 10


class SnakeMode(enum.Enum):
    FREE = "free"
    FIXED = "fixed"
    PERIODIC = "periodic"

    @classmethod
    def parse(cls, text: str) -> SnakeMode:
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise SnakeError(
                f"unknown snake mode '{text}'; expected free, fixed, or periodic"
            ) from None


class SoftCurve(enum.Enum):
    """Falloff shape for soft selection; only Linear ships for now."""

    LINEAR = "linear"

    @classmethod
    def parse(cls, text: str) -> SoftCurve:
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise SnakeError(f"unknown soft-select curve '{text}'") from None

    def __call__(self, t: np.ndarray | float):
        # curve(0) = 0 and curve(1) = 1 must hold for any future falloff.
        return t


@dataclass(frozen=True)
class Snake:
    """Ordered point chain v_0..v_{n-1} with an end-condition mode."""

    points: np.ndarray  # (n, 2) of (x, y)
    mode: SnakeMode = SnakeMode.FREE

    def __post_init__(self):
        arr = np.ascontiguousarray(np.atleast_2d(self.points), dtype=np.float64)
        arr.setflags(write=False)
        object.__setattr__(self, "points", arr)

    def __len__(self) -> int:
        return int(self.points.shape[0])

    def validate(self) -> None:
        if self.points.ndim != 2 or self.points.shape[1] != 2:
            raise SnakeError(f"snake points must be (n, 2), got {self.points.shape}")
        if not np.all(np.isfinite(self.points)):
            raise SnakeError("snake has non-finite points")
        n = len(self)
        if n < 2:
            raise SnakeError(f"snake needs at least 2 points, got {n}")
        if self.mode is SnakeMode.PERIODIC and n < 3:
            raise SnakeError(f"periodic snake needs at least 3 points, got {n}")


@dataclass(frozen=True)
class Tweakables:
    """Every knob of the pipeline, defaults tuned for 91x200 sketches."""

    gap_close_side: int = 2
    thin_iterations: int = 1
    snake_mode: SnakeMode = SnakeMode.FREE
    smoothness: float = 1.0       # beta, thin-plate term
    continuity: float = 0.1       # alpha, membrane term
    time_step: float = 2.0        # gamma in the semi-implicit update
    max_step_px: float = 1.0
    max_iterations: int = 3000
    convergence: float = 0.1
    w_brightness: float = -5.0
    w_edge: float = 1.0
    max_delta_px: float = 15.0
    low_depth_preference: float = 0.0
    soft_select_distance: float = 1.0
    soft_select_curve: SoftCurve = SoftCurve.LINEAR
    mirror_output: bool = False
    # Knobs the tables of published settings leave implicit.
    binarize_threshold: float = 0.5
    shade_ambient: float = 0.1
    force_periodic_closed: bool = True

    def validate(self) -> None:
        if self.gap_close_side < 1:
            raise SnakeError(f"gap_close_side must be >= 1, got {self.gap_close_side}")
        if self.thin_iterations < 0:
            raise SnakeError(f"thin_iterations must be >= 0, got {self.thin_iterations}")
        if self.max_iterations < 1:
            raise SnakeError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if not self.max_step_px > 0:
            raise SnakeError(f"max_step_px must be > 0, got {self.max_step_px}")
        if not self.convergence > 0:
            raise SnakeError(f"convergence must be > 0, got {self.convergence}")
        if not self.time_step > 0:
            raise SnakeError(f"time_step must be > 0, got {self.time_step}")
        if self.smoothness < 0 or self.continuity < 0:
            raise SnakeError("smoothness and continuity must be >= 0")
        if not self.soft_select_distance > 0:
            raise SnakeError(f"soft_select_distance must be > 0, got {self.soft_select_distance}")
        if not 0.0 <= self.low_depth_preference <= 1.0:
            raise SnakeError(
                f"low_depth_preference must be in [0, 1], got {self.low_depth_preference}"
            )
        if not self.max_delta_px > 0:
            raise SnakeError(f"max_delta_px must be > 0, got {self.max_delta_px}")
        if not 0.0 < self.binarize_threshold < 1.0:
            raise SnakeError(
                f"binarize_threshold must be in (0, 1), got {self.binarize_threshold}"
            )
        if not 0.0 <= self.shade_ambient < 1.0:
            raise SnakeError(f"shade_ambient must be in [0, 1), got {self.shade_ambient}")
        for name in ("w_brightness", "w_edge"):
            if not math.isfinite(getattr(self, name)):
                raise SnakeError(f"{name} must be finite")


@dataclass(frozen=True)
class ForceField:
    """Combined image energy F and its two sampled partial derivatives."""

    combined: np.ndarray
    dx: np.ndarray
    dy: np.ndarray

    def __post_init__(self):
        for name in ("combined", "dx", "dy"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def width(self) -> int:
        return int(self.combined.shape[1])

    @property
    def height(self) -> int:
        return int(self.combined.shape[0])


def _central_diff(f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    padded = np.pad(f, 1, mode="edge")
    dx = (padded[1:-1, 2:] - padded[1:-1, :-2]) / 2.0
    dy = (padded[2:, 1:-1] - padded[:-2, 1:-1]) / 2.0
    return dx, dy


def build_force_field(reference: GrayImage, tw: Tweakables) -> ForceField:
    """F = w_brightness*I + w_edge*G; snakes ascend F.

    G is the Sobel gradient magnitude of the reference, normalized to [0, 1].
    Partial derivatives use central differences with replicate padding and
    are later sampled bilinearly at snake points.
    """
    if reference.width < 3 or reference.height < 3:
        raise SnakeError(
            f"reference must be at least 3x3, got {reference.width}x{reference.height}"
        )
    grad = gradient_magnitude(reference)
    combined = tw.w_brightness * reference.pixels + tw.w_edge * grad.pixels
    dx, dy = _central_diff(combined)
    return ForceField(combined, dx, dy)


def _internal_matrix(n: int, mode: SnakeMode, alpha: float, beta: float) -> np.ndarray:
    """Assemble A = alpha*D1'D1 + beta*D2'D2 with mode-specific ends.

    Periodic wraps both difference operators; Free/Fixed use the one-sided
    (natural) stencils; Fixed additionally zeroes the end rows so pinned
    points receive no internal pull (their columns still pull neighbors).
    """
    if mode is SnakeMode.PERIODIC:
        d1 = np.zeros((n, n))
        d2 = np.zeros((n, n))
        for i in range(n):
            d1[i, i] = -1.0
            d1[i, (i + 1) % n] = 1.0
            d2[i, (i - 1) % n] = 1.0
            d2[i, i] = -2.0
            d2[i, (i + 1) % n] = 1.0
    else:
        d1 = np.zeros((n - 1, n))
        for i in range(n - 1):
            d1[i, i] = -1.0
            d1[i, i + 1] = 1.0
        d2 = np.zeros((max(n - 2, 0), n))
        for i in range(n - 2):
            d2[i, i] = 1.0
            d2[i, i + 1] = -2.0
            d2[i, i + 2] = 1.0
    a = alpha * (d1.T @ d1) + beta * (d2.T @ d2)
    if mode is SnakeMode.FIXED:
        a[0, :] = 0.0
        a[-1, :] = 0.0
    return a


def _inverse_update(n: int, mode: SnakeMode, tw: Tweakables) -> np.ndarray:
    a = _internal_matrix(n, mode, tw.continuity, tw.smoothness)
    system = a + tw.time_step * np.eye(n)
    # gamma > 0 makes the system positive definite (or triangular-pinned for
    # Fixed ends), so this cannot be singular.
    return np.linalg.inv(system)


def evolve_snake_stats(
    init: Snake, fieldf: ForceField, tw: Tweakables
) -> tuple[Snake, int, bool]:
    """Run the snake to convergence; also report iterations and the flag."""
    init.validate()
    tw.validate()
    n = len(init)
    inv_update = _inverse_update(n, init.mode, tw)
    x = np.ascontiguousarray(init.points[:, 0].copy())
    y = np.ascontiguousarray(init.points[:, 1].copy())
    pinned = init.mode is SnakeMode.FIXED
    iterations, converged = _kernel_evolve(
        x,
        y,
        np.ascontiguousarray(inv_update),
        fieldf.dx,
        fieldf.dy,
        float(tw.time_step),
        float(tw.max_step_px),
        int(tw.max_iterations),
        float(tw.convergence),
        CONVERGENCE_WINDOW,
        pinned,
        pinned,
        fieldf.width,
        fieldf.height,
    )
    return Snake(np.column_stack([x, y]), init.mode), int(iterations), bool(converged)


def evolve_snake(init: Snake, fieldf: ForceField, tw: Tweakables) -> Snake:
    out, _, _ = evolve_snake_stats(init, fieldf, tw)
    return out


@dataclass(frozen=True)
class SnakePair:
    """One contour's before/after snakes plus evolution stats."""

    contour_index: int
    input: Snake
    output: Snake
    iterations: int
    converged: bool


@dataclass(frozen=True)
class SkipReport:
    contour_index: int
    reason: str


@dataclass(frozen=True)
class RunSnakesResult:
    pairs: tuple[SnakePair, ...]
    skips: tuple[SkipReport, ...] = field(default=())


def _dedup_consecutive(points: np.ndarray, closed: bool) -> np.ndarray:
    keep = [0]
    for i in range(1, points.shape[0]):
        if not np.array_equal(points[i], points[keep[-1]]):
            keep.append(i)
    pts = points[keep]
    if closed and pts.shape[0] > 1 and np.array_equal(pts[0], pts[-1]):
        pts = pts[:-1]
    return pts


def run_snakes(
    contours: list[Contour], reference: GrayImage, tw: Tweakables
) -> RunSnakesResult:
    """Evolve every contour over the reference image.

    Closed contours run as Periodic snakes (unless force_periodic_closed is
    off); open ones use the configured mode. Input snakes are returned
    untouched for delta computation. A contour that degenerates after
    removing consecutive duplicate points is skipped and reported, the rest
    still run; output order matches input order.
    """
    tw.validate()
    fieldf = build_force_field(reference, tw)
    pairs: list[SnakePair] = []
    skips: list[SkipReport] = []
    for idx, contour in enumerate(contours):
        points = _dedup_consecutive(contour.points, contour.closed)
        if contour.closed and tw.force_periodic_closed:
            mode = SnakeMode.PERIODIC
        else:
            mode = tw.snake_mode
        n = points.shape[0]
        if n < 2 or (mode is SnakeMode.PERIODIC and n < 3):
            skips.append(
                SkipReport(idx, f"degenerate contour: {n} distinct points for mode {mode.value}")
            )
            continue
        snake_in = Snake(points, mode)
        try:
            snake_out, iterations, converged = evolve_snake_stats(snake_in, fieldf, tw)
        except SnakeError as exc:
            skips.append(SkipReport(idx, str(exc)))
            continue
        pairs.append(SnakePair(idx, snake_in, snake_out, iterations, converged))
    return RunSnakesResult(tuple(pairs), tuple(skips))


def resample_closed(points: np.ndarray, count: int) -> np.ndarray:
    """Evenly respace a closed polygon to `count` points by arc length.

    Helper for building periodic snake seeds (e.g. circles around a region);
    keeps inter-point spacing uniform so the internal energy is balanced.
    """
    if count < 3:
        raise SnakeError(f"closed resample needs >= 3 points, got {count}")
    pts = np.asarray(points, dtype=np.float64)
    loop = np.vstack([pts, pts[:1]])
    seg = np.linalg.norm(np.diff(loop, axis=0), axis=1)
    cuml = np.concatenate([[0.0], np.cumsum(seg)])
    total = float(cuml[-1])
    if total == 0.0:
        raise SnakeError("cannot resample a zero-length contour")
    targets = np.linspace(0.0, total, count, endpoint=False)
    out = np.empty((count, 2))
    for k, t in enumerate(targets):
        i = int(np.searchsorted(cuml, t, side="right") - 1)
        i = min(i, len(seg) - 1)
        frac = (t - cuml[i]) / seg[i] if seg[i] > 0 else 0.0
        out[k] = loop[i] + frac * (loop[i + 1] - loop[i])
    return out
