"""Front-view orthographic projection and shaded z-buffer rendering.

The camera looks down -Z. The mesh bounding box's vertical span is fitted to
the image height and centered horizontally, so one scale constant converts
between pixels and model units. Pixel y runs downward, hence the flip.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CameraError, ImageError
from .kernels import rasterize_triangles
from .mesh import Mesh, bounding_box

__all__ = [
    "GrayImage",
    "CameraFront",
    "VertexPixelMap",
    "project_vertices",
    "shade_render",
    "nearest_vertex_for_pixel",
    "nearest_vertex_for_pixels",
]


def _frozen(arr: np.ndarray, dtype=np.float64) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class GrayImage:
    """Row-major grayscale raster, float64 intensities in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pixels", _frozen(np.atleast_2d(self.pixels)))

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    def validate(self) -> None:
        if self.pixels.ndim != 2:
            raise ImageError(f"image must be 2D, got shape {self.pixels.shape}")
        if self.width == 0 or self.height == 0:
            raise ImageError("image has zero pixels")
        if not np.all(np.isfinite(self.pixels)):
            raise ImageError("image has non-finite intensities")
        lo = float(self.pixels.min())
        hi = float(self.pixels.max())
        if lo < 0.0 or hi > 1.0:
            raise ImageError(f"intensities outside [0, 1]: min {lo}, max {hi}")


@dataclass(frozen=True)
class CameraFront:
    """Orthographic front camera fitting bbox height to image height."""

    width: int
    height: int

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise CameraError(f"image size must be positive, got {self.width}x{self.height}")


@dataclass(frozen=True)
class VertexPixelMap:
    """Per-vertex screen projections plus the affine map that made them.

    ``pixel_x``/``pixel_y`` keep sub-pixel precision; ``depth`` is -model_z
    (smaller = nearer the camera). ``scale`` is pixels per model unit and
    ``center`` the bbox center the projection was anchored to, kept so pixel
    displacements can be lifted back to model space.
    """

    pixel_x: np.ndarray
    pixel_y: np.ndarray
    depth: np.ndarray
    scale: float
    center: np.ndarray
    width: int
    height: int
    # Normalized-depth cache for nearest-vertex scoring, built once.
    _depth_norm: np.ndarray = field(repr=False, default=None)  # type: ignore[assignment]

    def __post_init__(self):
        object.__setattr__(self, "pixel_x", _frozen(self.pixel_x))
        object.__setattr__(self, "pixel_y", _frozen(self.pixel_y))
        object.__setattr__(self, "depth", _frozen(self.depth))
        object.__setattr__(self, "center", _frozen(np.asarray(self.center).reshape(3)))
        dmin = float(self.depth.min())
        dmax = float(self.depth.max())
        if dmax > dmin:
            norm = (self.depth - dmin) / (dmax - dmin)
        else:
            norm = np.zeros_like(self.depth)
        object.__setattr__(self, "_depth_norm", _frozen(norm))

    @property
    def vertex_count(self) -> int:
        return int(self.pixel_x.shape[0])

    def unproject(self, px: float, py: float) -> tuple[float, float]:
        """Invert the affine (x, y) part of the projection."""
        x = (px - self.width / 2.0) / self.scale + float(self.center[0])
        y = float(self.center[1]) + (self.height / 2.0 - py) / self.scale
        return x, y


def project_vertices(mesh: Mesh, cam: CameraFront) -> VertexPixelMap:
    """Project every vertex to sub-pixel screen coordinates plus depth.

    pixel_x = (v.x - c.x)*s + width/2, pixel_y = height/2 - (v.y - c.y)*s,
    s = height / bbox_height, depth = -v.z.
    """
    if mesh.vertex_count == 0:
        raise CameraError("cannot project an empty mesh")
    bbox = bounding_box(mesh)
    if bbox.height <= 0.0:
        raise CameraError("mesh bounding box has zero height; front fit is undefined")
    s = cam.height / bbox.height
    c = bbox.center
    v = mesh.vertices
    return VertexPixelMap(
        pixel_x=(v[:, 0] - c[0]) * s + cam.width / 2.0,
        pixel_y=cam.height / 2.0 - (v[:, 1] - c[1]) * s,
        depth=-v[:, 2],
        scale=float(s),
        center=c,
        width=cam.width,
        height=cam.height,
    )


def _face_triangles(
    mesh: Mesh, vmap: VertexPixelMap, ambient: float
) -> tuple[np.ndarray, np.ndarray]:
    """Fan-triangulate faces and compute flat shading per source face.

    Shading uses the face normal from its first three vertices with light
    (0, 0, 1): intensity = max(0, n_z)*(1 - ambient) + ambient. Faces whose
    first three vertices are collinear are skipped.
    """
    tris: list[tuple[int, int, int]] = []
    shades: list[float] = []
    verts = mesh.vertices
    for face in mesh.faces:
        a, b, c = verts[face[0]], verts[face[1]], verts[face[2]]
        n = np.cross(b - a, c - a)
        length = float(np.linalg.norm(n))
        if length == 0.0:
            continue
        nz = float(n[2]) / length
        shade = max(0.0, nz) * (1.0 - ambient) + ambient
        for i in range(1, len(face) - 1):
            tris.append((face[0], face[i], face[i + 1]))
            shades.append(shade)

    if not tris:
        return np.zeros((0, 3, 3)), np.zeros(0)
    idx = np.array(tris, dtype=np.int64)
    tri = np.stack(
        [vmap.pixel_x[idx], vmap.pixel_y[idx], vmap.depth[idx]],
        axis=2,
    )
    return np.ascontiguousarray(tri, dtype=np.float64), np.array(shades, dtype=np.float64)


def shade_render(mesh: Mesh, cam: CameraFront, ambient: float = 0.1) -> GrayImage:
    """Render the mesh flat-shaded over a white background.

    Covered pixels land in [ambient, 1]; the background stays exactly 1.0.
    Quads are fan-triangulated for rasterization only; both halves carry the
    quad's shade. Depth test is strict less-than, so the first face in mesh
    order wins exact ties.
    """
    if not 0.0 <= ambient < 1.0:
        raise CameraError(f"ambient must be in [0, 1), got {ambient}")
    vmap = project_vertices(mesh, cam)
    tri, shades = _face_triangles(mesh, vmap, ambient)
    img = rasterize_triangles(tri, shades, cam.width, cam.height)
    return GrayImage(img)


def _scores(vmap: VertexPixelMap, px: float, py: float, p: float) -> np.ndarray:
    diag = float(np.hypot(vmap.width, vmap.height))
    d = np.hypot(vmap.pixel_x - px, vmap.pixel_y - py) / diag
    return (1.0 - p) * d + p * vmap._depth_norm


def nearest_vertex_for_pixel(
    vmap: VertexPixelMap, pixel: tuple[float, float], low_depth_preference: float = 0.0
) -> int:
    """Best vertex for a pixel under blended screen-distance/depth scoring.

    score = (1-p)*screen_dist/diag + p*depth_norm with depth_norm = 0 at the
    camera-nearest vertex. Ties break to the lowest vertex index.
    """
    if vmap.vertex_count == 0:
        raise CameraError("empty vertex map")
    p = float(low_depth_preference)
    if not 0.0 <= p <= 1.0:
        raise CameraError(f"low_depth_preference must be in [0, 1], got {p}")
    return int(np.argmin(_scores(vmap, float(pixel[0]), float(pixel[1]), p)))


def nearest_vertex_for_pixels(
    vmap: VertexPixelMap, pixels: np.ndarray, low_depth_preference: float = 0.0
) -> np.ndarray:
    """Vectorized nearest_vertex_for_pixel over an (m, 2) pixel array."""
    if vmap.vertex_count == 0:
        raise CameraError("empty vertex map")
    p = float(low_depth_preference)
    if not 0.0 <= p <= 1.0:
        raise CameraError(f"low_depth_preference must be in [0, 1], got {p}")
    pts = np.atleast_2d(np.asarray(pixels, dtype=np.float64))
    out = np.empty(pts.shape[0], dtype=np.int64)
    diag = float(np.hypot(vmap.width, vmap.height))
    # Chunk to bound the (pixels x vertices) distance matrix.
    chunk = max(1, int(2_000_000 // max(vmap.vertex_count, 1)))
    for start in range(0, pts.shape[0], chunk):
        block = pts[start : start + chunk]
        d = np.hypot(
            vmap.pixel_x[None, :] - block[:, 0:1],
            vmap.pixel_y[None, :] - block[:, 1:2],
        )
        score = (1.0 - p) * (d / diag) + p * vmap._depth_norm[None, :]
        out[start : start + chunk] = np.argmin(score, axis=1)
    return out
