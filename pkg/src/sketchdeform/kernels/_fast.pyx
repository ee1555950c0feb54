# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled compute kernels.

Same contracts as ``sketchdeform.kernels.pure``; that module's docstrings are
the reference. Keep the arithmetic in the same order as the pure backend so
the two stay within floating-point noise of each other.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, ceil, floor, sqrt

cnp.import_array()


cdef inline double _clampd(double v, double lo, double hi) nogil:
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


cdef inline double _bilinear_at(const double[:, ::1] field, double x, double y,
                                Py_ssize_t w, Py_ssize_t h) nogil:
    cdef double cx = _clampd(x, 0.0, w - 1.0)
    cdef double cy = _clampd(y, 0.0, h - 1.0)
    cdef Py_ssize_t x0 = <Py_ssize_t>floor(cx)
    cdef Py_ssize_t y0 = <Py_ssize_t>floor(cy)
    cdef Py_ssize_t x1 = x0 + 1
    cdef Py_ssize_t y1 = y0 + 1
    if x1 > w - 1:
        x1 = w - 1
    if y1 > h - 1:
        y1 = h - 1
    cdef double tx = cx - x0
    cdef double ty = cy - y0
    cdef double top = field[y0, x0] * (1.0 - tx) + field[y0, x1] * tx
    cdef double bot = field[y1, x0] * (1.0 - tx) + field[y1, x1] * tx
    return top * (1.0 - ty) + bot * ty


def snake_evolve(double[::1] x, double[::1] y, const double[:, ::1] inv_update,
                 const double[:, ::1] field_dx, const double[:, ::1] field_dy,
                 double gamma, double max_step, int max_iterations,
                 double convergence, int window, bint pin_first,
                 bint pin_last, int width, int height):
    """Semi-implicit snake iteration; see the pure backend for semantics."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t fw = field_dx.shape[1]
    cdef Py_ssize_t fh = field_dx.shape[0]
    cdef double xmax = width - 1.0
    cdef double ymax = height - 1.0

    fx_arr = np.empty(n, dtype=np.float64)
    fy_arr = np.empty(n, dtype=np.float64)
    nx_arr = np.empty(n, dtype=np.float64)
    ny_arr = np.empty(n, dtype=np.float64)
    rx_arr = np.empty(n, dtype=np.float64)
    ry_arr = np.empty(n, dtype=np.float64)
    hist_x_arr = np.empty((window, n), dtype=np.float64)
    hist_y_arr = np.empty((window, n), dtype=np.float64)
    cdef double[::1] fx = fx_arr
    cdef double[::1] fy = fy_arr
    cdef double[::1] nx = nx_arr
    cdef double[::1] ny = ny_arr
    cdef double[::1] rx = rx_arr
    cdef double[::1] ry = ry_arr
    cdef double[:, ::1] hist_x = hist_x_arr
    cdef double[:, ::1] hist_y = hist_y_arr

    cdef Py_ssize_t hist_size = 0
    cdef Py_ssize_t hist_head = 0
    cdef Py_ssize_t i, j, k
    cdef int iterations = 0
    cdef bint converged = False
    cdef double acc, dx, dy, dist, scale, disp, worst, best

    # Seed the history with the initial configuration.
    for i in range(n):
        hist_x[0, i] = x[i]
        hist_y[0, i] = y[i]
    hist_size = 1
    hist_head = 1 % window

    with nogil:
        while iterations < max_iterations:
            iterations += 1

            for i in range(n):
                fx[i] = _bilinear_at(field_dx, x[i], y[i], fw, fh)
                fy[i] = _bilinear_at(field_dy, x[i], y[i], fw, fh)
            if pin_first:
                fx[0] = 0.0
                fy[0] = 0.0
            if pin_last:
                fx[n - 1] = 0.0
                fy[n - 1] = 0.0

            for i in range(n):
                rx[i] = gamma * x[i] + fx[i]
                ry[i] = gamma * y[i] + fy[i]
            for i in range(n):
                acc = 0.0
                for j in range(n):
                    acc += inv_update[i, j] * rx[j]
                nx[i] = acc
                acc = 0.0
                for j in range(n):
                    acc += inv_update[i, j] * ry[j]
                ny[i] = acc

            for i in range(n):
                dx = nx[i] - x[i]
                dy = ny[i] - y[i]
                dist = sqrt(dx * dx + dy * dy)
                if dist > max_step:
                    scale = max_step / dist
                    nx[i] = x[i] + dx * scale
                    ny[i] = y[i] + dy * scale
            if pin_first:
                nx[0] = x[0]
                ny[0] = y[0]
            if pin_last:
                nx[n - 1] = x[n - 1]
                ny[n - 1] = y[n - 1]
            for i in range(n):
                nx[i] = _clampd(nx[i], 0.0, xmax)
                ny[i] = _clampd(ny[i], 0.0, ymax)

            best = INFINITY
            for k in range(hist_size):
                worst = 0.0
                for i in range(n):
                    dx = nx[i] - hist_x[k, i]
                    dy = ny[i] - hist_y[k, i]
                    disp = sqrt(dx * dx + dy * dy)
                    if disp > worst:
                        worst = disp
                if worst < best:
                    best = worst

            for i in range(n):
                x[i] = nx[i]
                y[i] = ny[i]
            if best < convergence:
                converged = True
                break

            for i in range(n):
                hist_x[hist_head, i] = x[i]
                hist_y[hist_head, i] = y[i]
            hist_head = (hist_head + 1) % window
            if hist_size < window:
                hist_size += 1

    return iterations, converged


def rasterize_triangles(const double[:, :, ::1] tri, const double[::1] shade,
                        int width, int height):
    """Z-buffered flat rasterization; see the pure backend for semantics."""
    img_arr = np.full((height, width), 1.0, dtype=np.float64)
    zbuf_arr = np.full((height, width), np.inf, dtype=np.float64)
    cdef double[:, ::1] img = img_arr
    cdef double[:, ::1] zbuf = zbuf_arr

    cdef Py_ssize_t m = tri.shape[0]
    cdef Py_ssize_t k, px, py
    cdef Py_ssize_t lo_x, hi_x, lo_y, hi_y
    cdef double x0, y0, z0, x1, y1, z1, x2, y2, z2
    cdef double area, tmp, minv, maxv
    cdef double e0, e1, e2, depth, gx, gy

    with nogil:
        for k in range(m):
            x0 = tri[k, 0, 0]; y0 = tri[k, 0, 1]; z0 = tri[k, 0, 2]
            x1 = tri[k, 1, 0]; y1 = tri[k, 1, 1]; z1 = tri[k, 1, 2]
            x2 = tri[k, 2, 0]; y2 = tri[k, 2, 1]; z2 = tri[k, 2, 2]
            area = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
            if area == 0.0:
                continue
            if area < 0.0:
                tmp = x1; x1 = x2; x2 = tmp
                tmp = y1; y1 = y2; y2 = tmp
                tmp = z1; z1 = z2; z2 = tmp
                area = -area

            minv = x0
            if x1 < minv: minv = x1
            if x2 < minv: minv = x2
            maxv = x0
            if x1 > maxv: maxv = x1
            if x2 > maxv: maxv = x2
            lo_x = <Py_ssize_t>ceil(minv)
            hi_x = <Py_ssize_t>floor(maxv)
            if lo_x < 0: lo_x = 0
            if hi_x > width - 1: hi_x = width - 1

            minv = y0
            if y1 < minv: minv = y1
            if y2 < minv: minv = y2
            maxv = y0
            if y1 > maxv: maxv = y1
            if y2 > maxv: maxv = y2
            lo_y = <Py_ssize_t>ceil(minv)
            hi_y = <Py_ssize_t>floor(maxv)
            if lo_y < 0: lo_y = 0
            if hi_y > height - 1: hi_y = height - 1

            if lo_x > hi_x or lo_y > hi_y:
                continue

            for py in range(lo_y, hi_y + 1):
                gy = <double>py
                for px in range(lo_x, hi_x + 1):
                    gx = <double>px
                    e0 = (x2 - x1) * (gy - y1) - (y2 - y1) * (gx - x1)
                    if e0 < 0.0:
                        continue
                    e1 = (x0 - x2) * (gy - y2) - (y0 - y2) * (gx - x2)
                    if e1 < 0.0:
                        continue
                    e2 = (x1 - x0) * (gy - y0) - (y1 - y0) * (gx - x0)
                    if e2 < 0.0:
                        continue
                    depth = (e0 * z0 + e1 * z1 + e2 * z2) / area
                    if depth < zbuf[py, px]:
                        zbuf[py, px] = depth
                        img[py, px] = shade[k]

    return img_arr
