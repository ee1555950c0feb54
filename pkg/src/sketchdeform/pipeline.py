"""End-to-end orchestration: config, alignment, stage engine, and reports.

The chain is pose -> render -> align -> preprocess -> snakes -> deltas ->
deform. Every stage is timed, every failure is wrapped with its stage name,
and a run with identical inputs and configuration writes bit-identical
artifacts (timings excepted).
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .deform import (
    DeltaField,
    VertexDisplacement,
    apply_soft_transforms,
    collect_deltas,
    resolve_vertex_displacements,
)
from .diagnostics import (
    binary_to_gray,
    contour_overlay,
    delta_map,
    rejection_report,
    snake_overlay,
    snakes_to_text,
)
from .errors import ConfigError, JobCancelled, PipelineStageError
from .imageproc import BinaryImage, Contour, binarize, close_gaps, extract_contours, thin
from .io_image import load_image, save_image
from .mesh import (
    ActivationVector,
    BlendshapeRig,
    Mesh,
    apply_blendshapes,
    bounding_box,
    load_activations,
    load_rig_manifest,
    save_obj,
)
from .raster import CameraFront, GrayImage, VertexPixelMap, project_vertices, shade_render
from .snake import RunSnakesResult, SnakeMode, SoftCurve, Tweakables, run_snakes

__all__ = [
    "DEFAULT_IMAGE_SIZE",
    "AlignmentTransform",
    "apply_alignment",
    "PipelineConfig",
    "config_from_text",
    "config_to_text",
    "RunReport",
    "PipelineArtifacts",
    "execute_pipeline",
    "run_pipeline",
    "pose_only",
]

# Working resolution the default tweakables are tuned for.
DEFAULT_IMAGE_SIZE = (91, 200)


@dataclass(frozen=True)
class AlignmentTransform:
    """Uniform scale + pixel translation placing the sketch in the render frame.

    Forward map: frame_point = scale * sketch_point + (tx, ty).
    """

    tx: float = 0.0
    ty: float = 0.0
    scale: float = 1.0

    def validate(self) -> None:
        if not self.scale > 0:
            raise ConfigError(f"alignment scale must be > 0, got {self.scale}")
        for v in (self.tx, self.ty, self.scale):
            if not np.isfinite(v):
                raise ConfigError("alignment transform has non-finite values")


def apply_alignment(
    sketch: GrayImage,
    t: AlignmentTransform,
    target_size: tuple[int, int] = DEFAULT_IMAGE_SIZE,
) -> GrayImage:
    """Resample the sketch into the render frame at the working resolution.

    Output pixel (x, y) samples the sketch bilinearly at ((x-tx)/s, (y-ty)/s);
    everything outside the sketch reads as white (paper background). Raises
    when the transformed sketch misses the frame entirely.
    """
    t.validate()
    tw_, th_ = target_size
    if tw_ <= 0 or th_ <= 0:
        raise ConfigError(f"target size must be positive, got {target_size}")

    w, h = sketch.width, sketch.height
    # Transformed sketch rectangle vs frame rectangle.
    x0, y0 = t.tx, t.ty
    x1, y1 = t.scale * (w - 1) + t.tx, t.scale * (h - 1) + t.ty
    if x1 < 0 or y1 < 0 or x0 > tw_ - 1 or y0 > th_ - 1:
        raise ConfigError("alignment places the sketch entirely outside the frame")

    gx, gy = np.meshgrid(
        np.arange(tw_, dtype=np.float64), np.arange(th_, dtype=np.float64)
    )
    sx = (gx - t.tx) / t.scale
    sy = (gy - t.ty) / t.scale

    # Pad one white ring so border samples blend toward white, and clamp
    # far-out samples onto pure padding.
    padded = np.pad(sketch.pixels, 1, mode="constant", constant_values=1.0)
    px = np.clip(sx + 1.0, 0.0, float(w + 1))
    py = np.clip(sy + 1.0, 0.0, float(h + 1))
    x0i = np.floor(px).astype(np.int64)
    y0i = np.floor(py).astype(np.int64)
    x1i = np.minimum(x0i + 1, w + 1)
    y1i = np.minimum(y0i + 1, h + 1)
    fx = px - x0i
    fy = py - y0i
    top = padded[y0i, x0i] * (1.0 - fx) + padded[y0i, x1i] * fx
    bot = padded[y1i, x0i] * (1.0 - fx) + padded[y1i, x1i] * fx
    out = top * (1.0 - fy) + bot * fy
    far = (sx < -1.0) | (sx > w) | (sy < -1.0) | (sy > h)
    out[far] = 1.0
    return GrayImage(out)


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a run needs; file paths may be absolute or cwd-relative."""

    tweakables: Tweakables = field(default_factory=Tweakables)
    alignment: AlignmentTransform = field(default_factory=AlignmentTransform)
    sketch: Path | None = None
    rig: Path | None = None
    activations: Path | None = None
    out_dir: Path = Path("out")
    image_width: int = DEFAULT_IMAGE_SIZE[0]
    image_height: int = DEFAULT_IMAGE_SIZE[1]

    @property
    def image_size(self) -> tuple[int, int]:
        return (self.image_width, self.image_height)

    def validate(self) -> None:
        self.tweakables.validate()
        self.alignment.validate()
        if self.image_width <= 0 or self.image_height <= 0:
            raise ConfigError(
                f"image size must be positive, got {self.image_width}x{self.image_height}"
            )


_INT_KEYS = {"gap_close_side", "thin_iterations", "max_iterations"}
_FLOAT_KEYS = {
    "smoothness",
    "continuity",
    "time_step",
    "max_step_px",
    "convergence",
    "w_brightness",
    "w_edge",
    "max_delta_px",
    "low_depth_preference",
    "soft_select_distance",
    "binarize_threshold",
    "shade_ambient",
}
_BOOL_KEYS = {"mirror_output", "force_periodic_closed"}
TWEAKABLE_KEYS = (
    _INT_KEYS | _FLOAT_KEYS | _BOOL_KEYS | {"snake_mode", "soft_select_curve"}
)


def _parse_bool(value: str, key: str) -> bool:
    low = value.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"bad boolean for {key}: '{value}'")


def parse_config_pairs(text: str, source: str = "<config>") -> dict[str, str]:
    """Flat `key = value` lines; blank lines and # comments skipped."""
    pairs: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{line_no}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{line_no}: empty key")
        pairs[key] = value
    return pairs


def tweakables_from_pairs(
    pairs: dict[str, str], base: Tweakables | None = None
) -> Tweakables:
    tw = base or Tweakables()
    updates: dict[str, object] = {}
    for key, value in pairs.items():
        if key in _INT_KEYS:
            try:
                updates[key] = int(value)
            except ValueError:
                raise ConfigError(f"bad integer for {key}: '{value}'") from None
        elif key in _FLOAT_KEYS:
            try:
                updates[key] = float(value)
            except ValueError:
                raise ConfigError(f"bad number for {key}: '{value}'") from None
        elif key in _BOOL_KEYS:
            updates[key] = _parse_bool(value, key)
        elif key == "snake_mode":
            updates[key] = SnakeMode.parse(value)
        elif key == "soft_select_curve":
            updates[key] = SoftCurve.parse(value)
    tw = replace(tw, **updates)
    tw.validate()
    return tw


def config_from_text(text: str, source: str = "<config>", base_dir: Path | None = None) -> PipelineConfig:
    """Build a full run config from flat text; unknown keys are rejected."""
    pairs = parse_config_pairs(text, source)
    known = TWEAKABLE_KEYS | {
        "sketch",
        "rig",
        "activations",
        "out_dir",
        "align_tx",
        "align_ty",
        "align_scale",
        "image_width",
        "image_height",
    }
    for key in pairs:
        if key not in known:
            raise ConfigError(f"{source}: unknown config key '{key}'")

    tw = tweakables_from_pairs({k: v for k, v in pairs.items() if k in TWEAKABLE_KEYS})

    def _path(key: str) -> Path | None:
        if key not in pairs:
            return None
        p = Path(pairs[key])
        if base_dir is not None and not p.is_absolute():
            p = base_dir / p
        return p

    def _float(key: str, default: float) -> float:
        if key not in pairs:
            return default
        try:
            return float(pairs[key])
        except ValueError:
            raise ConfigError(f"bad number for {key}: '{pairs[key]}'") from None

    def _int(key: str, default: int) -> int:
        if key not in pairs:
            return default
        try:
            return int(pairs[key])
        except ValueError:
            raise ConfigError(f"bad integer for {key}: '{pairs[key]}'") from None

    cfg = PipelineConfig(
        tweakables=tw,
        alignment=AlignmentTransform(
            tx=_float("align_tx", 0.0),
            ty=_float("align_ty", 0.0),
            scale=_float("align_scale", 1.0),
        ),
        sketch=_path("sketch"),
        rig=_path("rig"),
        activations=_path("activations"),
        out_dir=_path("out_dir") or Path("out"),
        image_width=_int("image_width", DEFAULT_IMAGE_SIZE[0]),
        image_height=_int("image_height", DEFAULT_IMAGE_SIZE[1]),
    )
    cfg.validate()
    return cfg


def config_to_text(cfg: PipelineConfig) -> str:
    """Serialize so config_from_text reproduces the run byte-identically."""
    tw = cfg.tweakables
    lines = [
        "# sketchdeform run configuration",
        f"gap_close_side = {tw.gap_close_side}",
        f"thin_iterations = {tw.thin_iterations}",
        f"snake_mode = {tw.snake_mode.value}",
        f"smoothness = {tw.smoothness!r}",
        f"continuity = {tw.continuity!r}",
        f"time_step = {tw.time_step!r}",
        f"max_step_px = {tw.max_step_px!r}",
        f"max_iterations = {tw.max_iterations}",
        f"convergence = {tw.convergence!r}",
        f"w_brightness = {tw.w_brightness!r}",
        f"w_edge = {tw.w_edge!r}",
        f"max_delta_px = {tw.max_delta_px!r}",
        f"low_depth_preference = {tw.low_depth_preference!r}",
        f"soft_select_distance = {tw.soft_select_distance!r}",
        f"soft_select_curve = {tw.soft_select_curve.value}",
        f"mirror_output = {str(tw.mirror_output).lower()}",
        f"binarize_threshold = {tw.binarize_threshold!r}",
        f"shade_ambient = {tw.shade_ambient!r}",
        f"force_periodic_closed = {str(tw.force_periodic_closed).lower()}",
        f"align_tx = {cfg.alignment.tx!r}",
        f"align_ty = {cfg.alignment.ty!r}",
        f"align_scale = {cfg.alignment.scale!r}",
        f"image_width = {cfg.image_width}",
        f"image_height = {cfg.image_height}",
    ]
    if cfg.sketch is not None:
        lines.append(f"sketch = {cfg.sketch}")
    if cfg.rig is not None:
        lines.append(f"rig = {cfg.rig}")
    if cfg.activations is not None:
        lines.append(f"activations = {cfg.activations}")
    lines.append(f"out_dir = {cfg.out_dir}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class RunReport:
    """Stage timings, stage counts, and where the artifacts went."""

    timings: dict[str, float] = field(default_factory=dict)
    contours: int = 0
    snakes_run: int = 0
    snakes_skipped: int = 0
    samples_total: int = 0
    samples_rejected: int = 0
    delta_pixels: int = 0
    displaced_vertices: int = 0
    outputs: dict[str, str] = field(default_factory=dict)

    def validate(self) -> None:
        for stage, seconds in self.timings.items():
            if seconds < 0:
                raise ConfigError(f"negative timing for {stage}")
        if self.samples_rejected > self.samples_total:
            raise ConfigError("rejected samples exceed total samples")

    def to_text(self) -> str:
        lines = [
            f"contours = {self.contours}",
            f"snakes_run = {self.snakes_run}",
            f"snakes_skipped = {self.snakes_skipped}",
            f"samples_total = {self.samples_total}",
            f"samples_rejected = {self.samples_rejected}",
            f"delta_pixels = {self.delta_pixels}",
            f"displaced_vertices = {self.displaced_vertices}",
        ]
        for stage, seconds in self.timings.items():
            lines.append(f"time_{stage} = {seconds:.3f}")
        for name, path in self.outputs.items():
            lines.append(f"out_{name} = {path}")
        return "\n".join(lines) + "\n"


@dataclass
class PipelineArtifacts:
    """Everything the stage engine produced, for callers that need more
    than the report (the HTTP service reuses these for previews)."""

    rig: BlendshapeRig | None = None
    posed: Mesh | None = None
    cam: CameraFront | None = None
    vmap: VertexPixelMap | None = None
    reference: GrayImage | None = None
    aligned: GrayImage | None = None
    binary: BinaryImage | None = None
    thinned: BinaryImage | None = None
    contours: list[Contour] = field(default_factory=list)
    snakes: RunSnakesResult | None = None
    deltas: DeltaField | None = None
    displacements: list[VertexDisplacement] = field(default_factory=list)
    output: Mesh | None = None
    timings: dict[str, float] = field(default_factory=dict)


_STAGE_ORDER = ("pose", "render", "align", "preprocess", "snakes", "deltas", "deform")


def execute_pipeline(
    cfg: PipelineConfig,
    until: str = "deform",
    cancel: threading.Event | None = None,
    into: PipelineArtifacts | None = None,
) -> PipelineArtifacts:
    """Run the stage chain up to and including `until`.

    Failures re-raise as PipelineStageError naming the stage; a set cancel
    event raises JobCancelled at the next stage boundary. Artifacts are
    filled as stages complete; pass `into` to keep the partial ones when a
    stage raises.
    """
    cfg.validate()
    if until not in _STAGE_ORDER:
        raise ConfigError(f"unknown stage '{until}'")
    last = _STAGE_ORDER.index(until)
    art = into if into is not None else PipelineArtifacts()
    tw = cfg.tweakables

    def _check_cancel() -> None:
        if cancel is not None and cancel.is_set():
            raise JobCancelled("pipeline run cancelled")

    def _stage(name: str):
        class _StageTimer:
            def __enter__(self_inner):
                _check_cancel()
                self_inner.start = time.perf_counter()
                return self_inner

            def __exit__(self_inner, exc_type, exc, tb):
                art.timings[name] = time.perf_counter() - self_inner.start
                if exc is not None and not isinstance(
                    exc, (PipelineStageError, JobCancelled)
                ):
                    raise PipelineStageError(name, exc) from exc
                return False

        return _StageTimer()

    # pose
    with _stage("pose"):
        if cfg.rig is None:
            raise ConfigError("no rig manifest configured")
        art.rig = load_rig_manifest(cfg.rig)
        act = (
            load_activations(cfg.activations)
            if cfg.activations is not None
            else ActivationVector({})
        )
        art.posed = apply_blendshapes(art.rig, act)
    if last == 0:
        return art

    # render
    with _stage("render"):
        art.cam = CameraFront(cfg.image_width, cfg.image_height)
        art.reference = shade_render(art.posed, art.cam, tw.shade_ambient)
        # The pixel<->vertex map is built exactly once, from the posed mesh,
        # before any deformation.
        art.vmap = project_vertices(art.posed, art.cam)
    if last == 1:
        return art

    # align
    with _stage("align"):
        if cfg.sketch is None:
            raise ConfigError("no sketch configured")
        sketch = load_image(cfg.sketch)
        art.aligned = apply_alignment(sketch, cfg.alignment, cfg.image_size)
    if last == 2:
        return art

    # preprocess
    with _stage("preprocess"):
        art.binary = close_gaps(
            binarize(art.aligned, tw.binarize_threshold), tw.gap_close_side
        )
        art.thinned = thin(art.binary, tw.thin_iterations)
        art.contours = extract_contours(art.thinned)
    if last == 3:
        return art

    # snakes
    with _stage("snakes"):
        art.snakes = run_snakes(art.contours, art.reference, tw)
    if last == 4:
        return art

    # deltas
    with _stage("deltas"):
        art.deltas = collect_deltas(list(art.snakes.pairs), tw)
    if last == 5:
        return art

    # deform
    with _stage("deform"):
        bbox = bounding_box(art.posed)
        art.displacements = resolve_vertex_displacements(
            art.deltas, art.vmap, art.cam, bbox, tw
        )
        art.output = apply_soft_transforms(art.posed, art.displacements, tw)
    return art


def _report_from(art: PipelineArtifacts, outputs: dict[str, str]) -> RunReport:
    snakes = art.snakes or RunSnakesResult(())
    deltas = art.deltas or DeltaField()
    timings = {
        "pose_render": art.timings.get("pose", 0.0) + art.timings.get("render", 0.0),
        "preprocess": art.timings.get("align", 0.0) + art.timings.get("preprocess", 0.0),
        "snakes_deltas": art.timings.get("snakes", 0.0) + art.timings.get("deltas", 0.0),
        "deform": art.timings.get("deform", 0.0),
    }
    report = RunReport(
        timings=timings,
        contours=len(art.contours),
        snakes_run=len(snakes.pairs),
        snakes_skipped=len(snakes.skips),
        samples_total=deltas.samples_total,
        samples_rejected=deltas.samples_rejected,
        delta_pixels=len(deltas.entries),
        displaced_vertices=len(art.displacements),
        outputs=outputs,
    )
    report.validate()
    return report


def persist_artifacts(
    art: PipelineArtifacts, cfg: PipelineConfig, out: Path
) -> dict[str, str]:
    """Write every populated artifact under `out`; returns name -> path."""
    out.mkdir(parents=True, exist_ok=True)
    outputs: dict[str, str] = {}
    if art.posed is not None:
        save_obj(art.posed, out / "posed.obj")
        outputs["posed"] = str(out / "posed.obj")
    if art.reference is not None:
        save_image(art.reference, out / "render.pgm")
        outputs["render"] = str(out / "render.pgm")
    if art.aligned is not None:
        save_image(art.aligned, out / "aligned.pgm")
        outputs["aligned"] = str(out / "aligned.pgm")
    if art.binary is not None:
        save_image(binary_to_gray(art.binary), out / "binary.pgm")
        outputs["binary"] = str(out / "binary.pgm")
    if art.thinned is not None:
        save_image(binary_to_gray(art.thinned), out / "thinned.pgm")
        outputs["thinned"] = str(out / "thinned.pgm")
        overlay = contour_overlay(binary_to_gray(art.thinned), art.contours)
        save_image(overlay, out / "contours_overlay.pgm")
        outputs["contours_overlay"] = str(out / "contours_overlay.pgm")
    if art.snakes is not None and art.reference is not None:
        save_image(
            snake_overlay(art.reference, art.snakes.pairs), out / "snakes_overlay.pgm"
        )
        outputs["snakes_overlay"] = str(out / "snakes_overlay.pgm")
        (out / "snakes.txt").write_text(
            snakes_to_text([p.output for p in art.snakes.pairs]), encoding="utf-8"
        )
        outputs["snakes"] = str(out / "snakes.txt")
    if art.deltas is not None:
        save_image(
            delta_map(art.deltas, cfg.image_width, cfg.image_height),
            out / "delta_map.pgm",
        )
        outputs["delta_map"] = str(out / "delta_map.pgm")
        (out / "rejections.txt").write_text(
            rejection_report(art.deltas), encoding="utf-8"
        )
        outputs["rejections"] = str(out / "rejections.txt")
    if art.output is not None:
        save_obj(art.output, out / "output.obj")
        outputs["output"] = str(out / "output.obj")
    return outputs


def run_pipeline(
    sketch: str | Path,
    rig: str | Path,
    activations: str | Path | None,
    alignment: AlignmentTransform,
    tw: Tweakables,
    out_dir: str | Path,
    image_size: tuple[int, int] = DEFAULT_IMAGE_SIZE,
) -> RunReport:
    """Full chain with all diagnostics written under out_dir.

    Artifacts: posed.obj, render.pgm, aligned.pgm, binary.pgm, thinned.pgm,
    contours_overlay.pgm, snakes_overlay.pgm, snakes.txt, delta_map.pgm,
    rejections.txt, output.obj, report.txt. On stage failure, artifacts from
    completed stages are kept and the error names the stage.
    """
    cfg = PipelineConfig(
        tweakables=tw,
        alignment=alignment,
        sketch=Path(sketch),
        rig=Path(rig),
        activations=Path(activations) if activations is not None else None,
        out_dir=Path(out_dir),
        image_width=image_size[0],
        image_height=image_size[1],
    )
    out = Path(out_dir)
    outputs: dict[str, str] = {}
    art = PipelineArtifacts()
    try:
        execute_pipeline(cfg, into=art)
    finally:
        # Persist whatever exists, even on mid-chain failure.
        outputs = persist_artifacts(art, cfg, out)

    report = _report_from(art, outputs)
    (out / "report.txt").write_text(report.to_text(), encoding="utf-8")
    (out / "config.txt").write_text(config_to_text(cfg), encoding="utf-8")
    return report


def pose_only(rig: str | Path, activations: str | Path | None, out_obj: str | Path) -> None:
    """Apply activations to the rig and save the posed mesh; nothing else.

    Exists so an external expression detector can drive posing without the
    image stages.
    """
    rig_data = load_rig_manifest(rig)
    act = load_activations(activations) if activations is not None else ActivationVector({})
    posed = apply_blendshapes(rig_data, act)
    save_obj(posed, out_obj)
