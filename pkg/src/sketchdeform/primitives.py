"""Procedural meshes used by the demo command and the test fixtures."""

from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np

from .mesh import Mesh

__all__ = ["uv_sphere", "box", "ngon_prism", "ngon_lathe"]


def uv_sphere(
    radius: float = 1.0,
    rings: int = 16,
    segments: int = 24,
    center: tuple[float, float, float] = (0.0, 0.0, 0.0),
) -> Mesh:
    """Latitude/longitude sphere: two triangle caps and quad bands between.

    ``rings`` latitude divisions (>= 2), ``segments`` longitude divisions
    (>= 3). All faces wind so the first-three-vertices normal points outward.
    """
    if rings < 2 or segments < 3:
        raise ValueError(f"need rings >= 2 and segments >= 3, got {rings}, {segments}")
    cx, cy, cz = center
    verts: list[tuple[float, float, float]] = [(cx, cy + radius, cz)]
    for i in range(1, rings):
        theta = math.pi * i / rings
        st, ct = math.sin(theta), math.cos(theta)
        for j in range(segments):
            phi = 2.0 * math.pi * j / segments
            verts.append((
                cx + radius * st * math.cos(phi),
                cy + radius * ct,
                cz + radius * st * math.sin(phi),
            ))
    south = len(verts)
    verts.append((cx, cy - radius, cz))

    def ring_start(i: int) -> int:
        return 1 + i * segments

    faces: list[tuple[int, ...]] = []
    for j in range(segments):
        jn = (j + 1) % segments
        faces.append((0, ring_start(0) + jn, ring_start(0) + j))
    for i in range(rings - 2):
        a = ring_start(i)
        b = ring_start(i + 1)
        for j in range(segments):
            jn = (j + 1) % segments
            faces.append((a + j, a + jn, b + jn, b + j))
    last = ring_start(rings - 2)
    for j in range(segments):
        jn = (j + 1) % segments
        faces.append((south, last + j, last + jn))

    return Mesh(np.array(verts, dtype=np.float64), tuple(faces))


def ngon_prism(
    radius: float,
    sides: int,
    depth: float,
    back_radius: float | None = None,
    center: tuple[float, float, float] = (0.0, 0.0, 0.0),
) -> Mesh:
    """Regular n-gon prism extruded along z; a smaller back ring tapers it.

    The front ring sits at +depth/2 with the given radius, the back ring at
    -depth/2 with ``back_radius`` (defaults to ``radius``). Vertex k of each
    ring is at angle 2*pi*k/sides. Faces wind outward.
    """
    rb = radius if back_radius is None else back_radius
    return ngon_lathe([(radius, depth / 2.0), (rb, -depth / 2.0)], sides, center)


def ngon_lathe(
    profile: Sequence[tuple[float, float]],
    sides: int,
    center: tuple[float, float, float] = (0.0, 0.0, 0.0),
) -> Mesh:
    """Stack regular n-gon rings along a (radius, z) profile and cap the ends.

    Ring i takes its radius and z offset from ``profile[i]``; vertex k of
    every ring sits at angle 2*pi*k/sides, so rings share plan-view corners.
    Consecutive rings are joined by quads and the first and last rings are
    closed with triangle fans. Run the profile front (+z) to back; quads and
    caps then wind outward.
    """
    if sides < 3:
        raise ValueError(f"need sides >= 3, got {sides}")
    if len(profile) < 2:
        raise ValueError(f"need at least 2 profile points, got {len(profile)}")
    cx, cy, cz = center
    ang = 2.0 * math.pi * np.arange(sides) / sides
    cos_a, sin_a = np.cos(ang), np.sin(ang)
    rows = [
        np.column_stack((cx + r * cos_a, cy + r * sin_a, np.full(sides, cz + z)))
        for r, z in profile
    ]
    verts = np.vstack(rows)

    faces: list[tuple[int, ...]] = []
    for i in range(len(profile) - 1):
        a, b = i * sides, (i + 1) * sides
        for k in range(sides):
            kn = (k + 1) % sides
            faces.append((a + k, b + k, b + kn, a + kn))
    for k in range(1, sides - 1):
        faces.append((0, k, k + 1))
    last = (len(profile) - 1) * sides
    for k in range(1, sides - 1):
        faces.append((last, last + k + 1, last + k))

    return Mesh(verts, tuple(faces))


def box(
    size: tuple[float, float, float] = (1.0, 1.0, 1.0),
    center: tuple[float, float, float] = (0.0, 0.0, 0.0),
) -> Mesh:
    """Axis-aligned box of six outward-facing quads."""
    sx, sy, sz = (s / 2.0 for s in size)
    cx, cy, cz = center
    corners = np.array(
        [
            (cx - sx, cy - sy, cz - sz),
            (cx + sx, cy - sy, cz - sz),
            (cx + sx, cy + sy, cz - sz),
            (cx - sx, cy + sy, cz - sz),
            (cx - sx, cy - sy, cz + sz),
            (cx + sx, cy - sy, cz + sz),
            (cx + sx, cy + sy, cz + sz),
            (cx - sx, cy + sy, cz + sz),
        ],
        dtype=np.float64,
    )
    faces = (
        (0, 3, 2, 1),  # back  (-z)
        (4, 5, 6, 7),  # front (+z)
        (0, 1, 5, 4),  # bottom
        (2, 3, 7, 6),  # top
        (0, 4, 7, 3),  # left
        (1, 2, 6, 5),  # right
    )
    return Mesh(corners, faces)
