"""Contour-guided mesh deformation toolkit.

Turn a posed mesh and a single-view sketch into targeted surface edits: the
mesh is rendered front-on, its silhouette and feature contours are extracted,
active contours pull those toward the drawing, and the resulting 2D point
deltas are lifted back onto nearby vertices as smooth 3D displacements.
"""

from __future__ import annotations

from .errors import (
    CameraError,
    ConfigError,
    ImageError,
    MeshError,
    ObjParseError,
    PipelineStageError,
    RigError,
    SketchDeformError,
    SnakeError,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "SketchDeformError",
    "MeshError",
    "ObjParseError",
    "RigError",
    "ImageError",
    "CameraError",
    "SnakeError",
    "ConfigError",
    "PipelineStageError",
]
