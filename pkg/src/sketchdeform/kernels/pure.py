"""Pure-numpy compute kernels.

This module is the fallback backend: it implements exactly the same
signatures as the compiled extension (``sketchdeform.kernels._fast``) and is
selected automatically when the extension is unavailable, or explicitly via
``SKETCHDEFORM_BACKEND=pure``. Both backends must agree to floating-point
noise; the test suite compares them directly.
"""

from __future__ import annotations

from collections import deque

import numpy as np

__all__ = ["snake_evolve", "rasterize_triangles"]


def _bilinear(field: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample a 2D field at sub-pixel points, clamping to the border."""
    h, w = field.shape
    x = np.clip(xs, 0.0, w - 1.0)
    y = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    tx = x - x0
    ty = y - y0
    top = field[y0, x0] * (1.0 - tx) + field[y0, x1] * tx
    bot = field[y1, x0] * (1.0 - tx) + field[y1, x1] * tx
    return top * (1.0 - ty) + bot * ty


def snake_evolve(
    x: np.ndarray,
    y: np.ndarray,
    inv_update: np.ndarray,
    field_dx: np.ndarray,
    field_dy: np.ndarray,
    gamma: float,
    max_step: float,
    max_iterations: int,
    convergence: float,
    window: int,
    pin_first: bool,
    pin_last: bool,
    width: int,
    height: int,
) -> tuple[int, bool]:
    """Iterate the semi-implicit snake update in place.

    Each step solves x <- inv_update @ (gamma*x + Fx(x, y)) (same for y),
    clamps every point's displacement to ``max_step`` (Euclidean), keeps
    pinned endpoints exactly still, and clamps points to image bounds.
    Converged when the new configuration lies within ``convergence`` (max
    per-point distance) of the closest of the last ``window`` configurations.

    Returns (iterations run, converged flag). ``x`` and ``y`` are mutated.
    """
    xmax = float(width - 1)
    ymax = float(height - 1)
    history: deque[tuple[np.ndarray, np.ndarray]] = deque(maxlen=window)
    history.append((x.copy(), y.copy()))
    iterations = 0
    converged = False

    for iterations in range(1, max_iterations + 1):
        fx = _bilinear(field_dx, x, y)
        fy = _bilinear(field_dy, x, y)
        if pin_first:
            fx[0] = 0.0
            fy[0] = 0.0
        if pin_last:
            fx[-1] = 0.0
            fy[-1] = 0.0

        nx = inv_update @ (gamma * x + fx)
        ny = inv_update @ (gamma * y + fy)

        dx = nx - x
        dy = ny - y
        dist = np.hypot(dx, dy)
        over = dist > max_step
        if np.any(over):
            scale = max_step / dist[over]
            nx[over] = x[over] + dx[over] * scale
            ny[over] = y[over] + dy[over] * scale

        if pin_first:
            nx[0] = x[0]
            ny[0] = y[0]
        if pin_last:
            nx[-1] = x[-1]
            ny[-1] = y[-1]

        np.clip(nx, 0.0, xmax, out=nx)
        np.clip(ny, 0.0, ymax, out=ny)

        best = np.inf
        for hx, hy in history:
            disp = float(np.max(np.hypot(nx - hx, ny - hy)))
            if disp < best:
                best = disp

        x[:] = nx
        y[:] = ny
        if best < convergence:
            converged = True
            break
        history.append((nx.copy(), ny.copy()))

    return iterations, converged


def rasterize_triangles(
    tri: np.ndarray,
    shade: np.ndarray,
    width: int,
    height: int,
) -> np.ndarray:
    """Z-buffer rasterize shaded triangles onto a white image.

    ``tri`` is (m, 3, 3): per triangle, three vertices of (pixel_x, pixel_y,
    depth). ``shade`` is the flat intensity per triangle. Pixels sample at
    integer coordinates; coverage is inclusive of edges; the depth test is
    strict, so the earliest triangle wins exact depth ties.
    """
    img = np.full((height, width), 1.0, dtype=np.float64)
    zbuf = np.full((height, width), np.inf, dtype=np.float64)

    for k in range(tri.shape[0]):
        x0, y0, z0 = tri[k, 0]
        x1, y1, z1 = tri[k, 1]
        x2, y2, z2 = tri[k, 2]
        area = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        if area == 0.0:
            continue
        if area < 0.0:
            # Reorder so edge functions are non-negative inside.
            x1, y1, z1, x2, y2, z2 = x2, y2, z2, x1, y1, z1
            area = -area

        lo_x = max(0, int(np.ceil(min(x0, x1, x2))))
        hi_x = min(width - 1, int(np.floor(max(x0, x1, x2))))
        lo_y = max(0, int(np.ceil(min(y0, y1, y2))))
        hi_y = min(height - 1, int(np.floor(max(y0, y1, y2))))
        if lo_x > hi_x or lo_y > hi_y:
            continue

        px = np.arange(lo_x, hi_x + 1, dtype=np.float64)
        py = np.arange(lo_y, hi_y + 1, dtype=np.float64)
        gx, gy = np.meshgrid(px, py)

        e0 = (x2 - x1) * (gy - y1) - (y2 - y1) * (gx - x1)
        e1 = (x0 - x2) * (gy - y2) - (y0 - y2) * (gx - x2)
        e2 = (x1 - x0) * (gy - y0) - (y1 - y0) * (gx - x0)
        inside = (e0 >= 0.0) & (e1 >= 0.0) & (e2 >= 0.0)
        if not np.any(inside):
            continue

        depth = (e0 * z0 + e1 * z1 + e2 * z2) / area
        zview = zbuf[lo_y : hi_y + 1, lo_x : hi_x + 1]
        win = inside & (depth < zview)
        if not np.any(win):
            continue
        zview[win] = depth[win]
        img[lo_y : hi_y + 1, lo_x : hi_x + 1][win] = shade[k]

    return img
