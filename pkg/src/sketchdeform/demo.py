"""Self-contained demo fixture: a round-shouldered puck rig plus a drawing.

Fabricates everything an end-to-end run needs: a blendshape rig whose single
target notches one corner of the puck inward, an activation file that leaves
the target off, and a "sketch" synthesized by filling the silhouette of the
notched puck. Running the pipeline on the plain pose against that sketch
reproduces the notch, which makes this both the quickstart demo and a test
fixture.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .imageproc import binarize
from .io_image import save_image
from .mesh import Mesh, save_obj
from .primitives import ngon_lathe
from .raster import CameraFront, GrayImage, shade_render

__all__ = [
    "dent_mesh",
    "groove_mesh",
    "silhouette_sketch",
    "write_demo_assets",
    "DEMO_IMAGE_SIZE",
]

DEMO_IMAGE_SIZE = (160, 160)


def dent_mesh(
    base: Mesh,
    center: np.ndarray,
    radius: float,
    depth: float,
    direction: tuple[float, float, float] = (-1.0, 0.0, 0.0),
) -> Mesh:
    """Push vertices near `center` along `direction` (unit vector).

    Cosine falloff from the patch center; vertices outside `radius` stay.
    """
    verts = base.vertices.copy()
    dist = np.linalg.norm(verts - center, axis=1)
    inside = dist < radius
    fall = 0.5 * (1.0 + np.cos(np.pi * dist[inside] / radius))
    verts[inside] += depth * fall[:, None] * np.asarray(direction, dtype=np.float64)
    return Mesh(verts, base.faces)


def groove_mesh(
    base: Mesh,
    angle_deg: float,
    halfwidth_deg: float,
    depth: float,
) -> Mesh:
    """Press vertices near an xy bearing radially inward.

    Vertices whose plan-view angle lies within `halfwidth_deg` of `angle_deg`
    move toward the z axis by up to `depth`, with a cosine falloff on angular
    distance. Cuts a vertical notch into a mesh centered on the z axis.
    """
    verts = base.vertices.copy()
    bearing = np.degrees(np.arctan2(verts[:, 1], verts[:, 0]))
    dist = np.abs((bearing - angle_deg + 180.0) % 360.0 - 180.0)
    inside = dist < halfwidth_deg
    fall = 0.5 * (1.0 + np.cos(np.pi * dist[inside] / halfwidth_deg))
    r = np.hypot(verts[inside, 0], verts[inside, 1])
    shrink = np.maximum(r - depth * fall, 0.0) / np.maximum(r, 1e-12)
    verts[inside, 0] *= shrink
    verts[inside, 1] *= shrink
    return Mesh(verts, base.faces)


def _fill_holes(mask: np.ndarray) -> np.ndarray:
    """Foreground plus every region not reachable from the border background."""
    h, w = mask.shape
    outside = np.zeros_like(mask)
    stack = [(y, x) for x in range(w) for y in (0, h - 1) if not mask[y, x]]
    stack += [(y, x) for y in range(h) for x in (0, w - 1) if not mask[y, x]]
    for y, x in stack:
        outside[y, x] = True
    while stack:
        y, x = stack.pop()
        for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
            if 0 <= ny < h and 0 <= nx < w and not mask[ny, nx] and not outside[ny, nx]:
                outside[ny, nx] = True
                stack.append((ny, nx))
    return ~outside


def silhouette_sketch(mesh: Mesh, cam: CameraFront, ink: float = 0.0) -> GrayImage:
    """Paint the mesh's filled silhouette dark on a white canvas.

    Stands in for a hand drawing. A filled shape beats a traced outline
    here: a thin stroke's extracted contour wraps the stroke on both sides,
    and that flattened loop keeps contracting along the feature it locked
    onto, smearing the point correspondences. The boundary of a filled
    region is a single-cover curve and stays put.
    """
    render = shade_render(mesh, cam)
    body = binarize(render, 0.99)
    filled = _fill_holes(body.bits)
    canvas = np.ones((cam.height, cam.width), dtype=np.float64)
    canvas[filled] = ink
    return GrayImage(canvas)


def write_demo_assets(out_dir: str | Path) -> dict[str, Path]:
    """Write rig, activations, sketch, and a ready-to-run config.

    Returns the paths keyed by role. `sketchdeform run --config <config>`
    afterwards performs the full sketch-to-deformation chain.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    # A 16-sided puck whose shoulder is a quarter-round: in plan view every
    # outline edge is straight, and the rounded profile sweeps the surface
    # normal from camera-facing to edge-on, shading the render from white to
    # dark across the rim. That ramp is the slope the snakes climb back to
    # the outline. Straight outline edges matter: pixel-grid force noise on
    # a straight run averages out locally, where a curved rim herds points
    # sideways. The profile ends AT the rim ring, so the rim alone decides
    # the silhouette and a notched rim recedes by its full depth.
    # 5-degree profile steps keep the shading bands under a pixel wide;
    # coarser steps render flat bands whose seams are gradient ridges that
    # trap climbing snake points partway up the shoulder.
    rim = 0.8
    arc = np.radians(np.linspace(0.0, 90.0, 19))
    profile = [
        (5.0 - rim + rim * math.sin(t), 1.5 - rim + rim * math.cos(t)) for t in arc
    ]
    base = ngon_lathe(profile, sides=16)
    # Notch one corner, away from the bbox extremes: the front camera frames
    # each mesh by its own bounds, so a notch that moved the bbox would
    # shift the traced sketch against the reference render and bury the
    # local signal under a global misalignment. Depth stays well under
    # max_delta_px at this image scale so its deltas are kept.
    dented = groove_mesh(base, angle_deg=45.0, halfwidth_deg=35.0, depth=0.5)
    save_obj(base, out / "base.obj")
    save_obj(dented, out / "dent.obj")

    manifest = "base = base.obj\nmax_level = 10\ndent = dent.obj\n"
    (out / "rig.txt").write_text(manifest, encoding="utf-8")
    # Activation 0 poses the plain puck; the drawing supplies the notch.
    (out / "activations.txt").write_text("dent = 0\n", encoding="utf-8")

    width, height = DEMO_IMAGE_SIZE
    cam = CameraFront(width, height)
    sketch = silhouette_sketch(dented, cam)
    save_image(sketch, out / "sketch.png")

    config = "\n".join(
        [
            "# demo: deform the puck to match the notched-silhouette drawing",
            "rig = rig.txt",
            "sketch = sketch.png",
            "out_dir = out",
            f"image_width = {width}",
            f"image_height = {height}",
            "# reach the next couple of shoulder rings below a displaced rim",
            "# vertex so the notch rounds off instead of creasing at the rim",
            "soft_select_distance = 0.6",
            "# the silhouette meets the frame, so its contour splits into open",
            "# arcs; pinning their ends keeps them from crawling along the rim",
            "snake_mode = fixed",
            "# long runs let points drift along the outline toward the plan-view",
            "# corners (convex corners are force maxima along the rim valley);",
            "# 80 iterations completes the transverse snap before much drift",
            "max_iterations = 80",
            "",
        ]
    )
    (out / "config.txt").write_text(config, encoding="utf-8")
    return {
        "rig": out / "rig.txt",
        "base": out / "base.obj",
        "dent": out / "dent.obj",
        "activations": out / "activations.txt",
        "sketch": out / "sketch.png",
        "config": out / "config.txt",
    }
