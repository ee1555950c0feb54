"""Exception types shared across the toolkit."""


class SketchDeformError(Exception):
    """Base class for all toolkit errors."""


class MeshError(SketchDeformError):
    """Invalid mesh data (empty mesh, bad face indices, malformed OBJ)."""


class ObjParseError(MeshError):
    """OBJ file could not be parsed; message carries the line number."""


class RigError(SketchDeformError):
    """Blendshape rig inconsistency or unknown activation name."""


class ImageError(SketchDeformError):
    """Invalid image data or unsupported image file."""


class CameraError(SketchDeformError):
    """Degenerate camera fit (e.g. zero-height bounding box)."""


class SnakeError(SketchDeformError):
    """Snake construction or evolution failure."""


class ConfigError(SketchDeformError):
    """Malformed configuration, rig manifest, or activation file."""


class PipelineStageError(SketchDeformError):
    """A pipeline stage failed; names the stage and chains the cause."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


class JobCancelled(SketchDeformError):
    """A pipeline run noticed its cancel flag between stages."""
