"""From snake motion to mesh deformation.

Three steps: difference the input/output snakes into per-pixel 2D deltas
(oversized ones rejected), find the vertex behind each delta pixel and lift
the averaged delta into a 3D model-space displacement, then push vertices
with a soft-select falloff so neighborhoods follow smoothly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MeshError
from .mesh import BoundingBox, Mesh, bounding_box, mirror_average
from .raster import CameraFront, VertexPixelMap, nearest_vertex_for_pixels
from .snake import SnakePair, Tweakables

__all__ = [
    "DeltaSample",
    "DeltaRejection",
    "DeltaField",
    "VertexDisplacement",
    "collect_deltas",
    "resolve_vertex_displacements",
    "apply_soft_transforms",
]


@dataclass(frozen=True)
class DeltaSample:
    """One snake point's contribution: where it landed and how far it came."""

    target: tuple[float, float]
    delta: tuple[float, float]


@dataclass(frozen=True)
class DeltaRejection:
    """A sample whose delta exceeded max_delta_px, kept for reporting."""

    contour_index: int
    point_index: int
    magnitude: float


@dataclass(frozen=True)
class DeltaField:
    """Mean 2D delta per integer pixel, plus the rejected-sample report."""

    entries: dict[tuple[int, int], tuple[float, float]] = field(default_factory=dict)
    counts: dict[tuple[int, int], int] = field(default_factory=dict)
    rejections: tuple[DeltaRejection, ...] = ()
    samples_total: int = 0

    @property
    def samples_rejected(self) -> int:
        return len(self.rejections)


def _round_pixel(value: float) -> int:
    # Round half up so .5 boundaries bucket deterministically.
    return int(np.floor(value + 0.5))


def collect_deltas(pairs: list[SnakePair], tw: Tweakables) -> DeltaField:
    """Difference each pair pointwise and average deltas per target pixel.

    delta_i = input_i - output_i (the vector that would carry the evolved
    point back onto the drawing's stroke). Samples with magnitude above
    max_delta_px are excluded from the field but reported; they flag contours
    that mapped badly or have no counterpart on the model.
    """
    tw.validate()
    sums: dict[tuple[int, int], np.ndarray] = {}
    counts: dict[tuple[int, int], int] = {}
    rejections: list[DeltaRejection] = []
    total = 0
    for pair in pairs:
        pin = pair.input.points
        pout = pair.output.points
        if pin.shape != pout.shape:
            raise MeshError(
                f"contour {pair.contour_index}: input has {pin.shape[0]} points, "
                f"output has {pout.shape[0]}"
            )
        deltas = pin - pout
        mags = np.hypot(deltas[:, 0], deltas[:, 1])
        total += pin.shape[0]
        for i in range(pin.shape[0]):
            if mags[i] > tw.max_delta_px:
                rejections.append(DeltaRejection(pair.contour_index, i, float(mags[i])))
                continue
            key = (_round_pixel(float(pout[i, 0])), _round_pixel(float(pout[i, 1])))
            if key in sums:
                sums[key] += deltas[i]
                counts[key] += 1
            else:
                sums[key] = deltas[i].copy()
                counts[key] = 1
    entries = {
        key: (float(s[0] / counts[key]), float(s[1] / counts[key]))
        for key, s in sums.items()
    }
    return DeltaField(entries, counts, tuple(rejections), total)


@dataclass(frozen=True)
class VertexDisplacement:
    """A 3D model-space push anchored at one vertex (z stays untouched)."""

    vertex: int
    displacement: tuple[float, float, float]


def resolve_vertex_displacements(
    fieldd: DeltaField,
    vmap: VertexPixelMap,
    cam: CameraFront,
    bbox: BoundingBox,
    tw: Tweakables,
) -> list[VertexDisplacement]:
    """Map each delta pixel to its vertex and convert the delta to model units.

    Pixel deltas divide by the camera scale; the y component flips sign
    because pixel y grows downward. Pixels resolving to the same vertex have
    their model-space displacements averaged. Output is ordered by vertex
    index (deterministic regardless of dict ordering).
    """
    tw.validate()
    if vmap.vertex_count == 0:
        raise MeshError("vertex map is empty")
    if not fieldd.entries:
        return []
    keys = sorted(fieldd.entries.keys())
    pixels = np.array(keys, dtype=np.float64)
    winners = nearest_vertex_for_pixels(vmap, pixels, tw.low_depth_preference)
    s = vmap.scale
    sums: dict[int, np.ndarray] = {}
    counts: dict[int, int] = {}
    for key, vid in zip(keys, winners.tolist()):
        dx, dy = fieldd.entries[key]
        model = np.array([dx / s, -dy / s, 0.0])
        if vid in sums:
            sums[vid] += model
            counts[vid] += 1
        else:
            sums[vid] = model
            counts[vid] = 1
    return [
        VertexDisplacement(vid, tuple((sums[vid] / counts[vid]).tolist()))
        for vid in sorted(sums.keys())
    ]


def apply_soft_transforms(
    mesh: Mesh, disps: list[VertexDisplacement], tw: Tweakables
) -> Mesh:
    """Displace the mesh with soft-select falloff around each anchor vertex.

    For an anchor at original position c with vector d, every vertex within
    soft_select_distance of c (measured between ORIGINAL positions) gains
    curve(1 - dist/ssd) * d. Contributions from all anchors accumulate in a
    canonical order and apply in one batch, so the result is bit-identical
    under any shuffle of the input list. mirror_output finishes by
    mirror-averaging about the original bounding box's x center.
    """
    tw.validate()
    mesh.validate()
    if not disps:
        return mesh
    for d in disps:
        if not 0 <= d.vertex < mesh.vertex_count:
            raise MeshError(f"displacement anchors unknown vertex {d.vertex}")

    original = mesh.vertices
    ssd = tw.soft_select_distance
    curve = tw.soft_select_curve
    accum = np.zeros_like(original)
    # Canonical order makes the float accumulation permutation-invariant.
    ordered = sorted(disps, key=lambda d: (d.vertex, d.displacement))
    for d in ordered:
        center = original[d.vertex]
        dist = np.linalg.norm(original - center, axis=1)
        inside = dist < ssd
        if not np.any(inside):
            continue
        weights = curve(1.0 - dist[inside] / ssd)
        accum[inside] += weights[:, None] * np.asarray(d.displacement)
    moved = Mesh(original + accum, mesh.faces)
    if tw.mirror_output:
        plane_x = float(bounding_box(mesh).center[0])
        moved = mirror_average(moved, plane_x)
    return moved
