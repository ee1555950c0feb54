"""HTTP session service: the machine side of the human-in-the-loop steps.

One session holds uploaded assets (sketch, rig, activations), the alignment
transform, and the tweakables. At most one job (snakes preview or full
deform) runs per session at a time; jobs run on worker threads, poll via
GET, and honor cancellation at stage boundaries. Everything lives under
/v1/ and all payloads are the same file formats the CLI consumes, images
wrapped as base64 strings in small JSON envelopes.
"""

from __future__ import annotations

import base64
import io
import secrets
import shutil
import tempfile
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path

from fastapi import Body, FastAPI, HTTPException
from fastapi.responses import PlainTextResponse
from PIL import Image as _PILImage

from .diagnostics import delta_map, snake_overlay
from .errors import ConfigError, JobCancelled, PipelineStageError, SketchDeformError
from .io_image import quantize
from .pipeline import (
    DEFAULT_IMAGE_SIZE,
    AlignmentTransform,
    PipelineArtifacts,
    PipelineConfig,
    config_to_text,
    execute_pipeline,
    run_pipeline,
    TWEAKABLE_KEYS,
)
from .raster import GrayImage
from .snake import SnakeMode, SoftCurve, Tweakables

__all__ = ["create_app", "app"]

_ASSET_KINDS = ("sketch", "rig_manifest", "rig_obj", "activations")


def _png_b64(img: GrayImage) -> str:
    buf = io.BytesIO()
    _PILImage.fromarray(quantize(img), mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _tweakables_dict(tw: Tweakables) -> dict:
    return {
        "gap_close_side": tw.gap_close_side,
        "thin_iterations": tw.thin_iterations,
        "snake_mode": tw.snake_mode.value,
        "smoothness": tw.smoothness,
        "continuity": tw.continuity,
        "time_step": tw.time_step,
        "max_step_px": tw.max_step_px,
        "max_iterations": tw.max_iterations,
        "convergence": tw.convergence,
        "w_brightness": tw.w_brightness,
        "w_edge": tw.w_edge,
        "max_delta_px": tw.max_delta_px,
        "low_depth_preference": tw.low_depth_preference,
        "soft_select_distance": tw.soft_select_distance,
        "soft_select_curve": tw.soft_select_curve.value,
        "mirror_output": tw.mirror_output,
        "binarize_threshold": tw.binarize_threshold,
        "shade_ambient": tw.shade_ambient,
        "force_periodic_closed": tw.force_periodic_closed,
    }


def _tweakables_update(tw: Tweakables, payload: dict) -> Tweakables:
    """Apply a JSON-typed partial update; unknown keys are an error."""
    updates: dict[str, object] = {}
    for key, value in payload.items():
        if key not in TWEAKABLE_KEYS:
            raise ConfigError(f"unknown tweakable '{key}'")
        if key == "snake_mode":
            updates[key] = SnakeMode.parse(str(value))
        elif key == "soft_select_curve":
            updates[key] = SoftCurve.parse(str(value))
        elif key in ("gap_close_side", "thin_iterations", "max_iterations"):
            updates[key] = int(value)
        elif key in ("mirror_output", "force_periodic_closed"):
            if not isinstance(value, bool):
                raise ConfigError(f"{key} must be a boolean")
            updates[key] = value
        else:
            updates[key] = float(value)
    out = replace(tw, **updates)
    out.validate()
    return out


@dataclass
class Job:
    id: str
    kind: str  # "snakes" | "deform"
    status: str = "queued"  # queued | running | done | failed | cancelled
    result: dict | None = None
    error: dict | None = None
    cancel: threading.Event = field(default_factory=threading.Event)
    thread: threading.Thread | None = None

    def view(self) -> dict:
        out = {"job_id": self.id, "kind": self.kind, "status": self.status}
        if self.result is not None:
            out["result"] = self.result
        if self.error is not None:
            out["error"] = self.error
        return out


@dataclass
class Session:
    id: str
    dir: Path
    alignment: AlignmentTransform = field(default_factory=AlignmentTransform)
    tweakables: Tweakables = field(default_factory=Tweakables)
    image_width: int = DEFAULT_IMAGE_SIZE[0]
    image_height: int = DEFAULT_IMAGE_SIZE[1]
    assets: dict[str, str] = field(default_factory=dict)  # name -> kind
    sketch_name: str | None = None
    manifest_name: str | None = None
    activations_name: str | None = None
    jobs: dict[str, Job] = field(default_factory=dict)
    current_job: str | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)

    def config(self) -> PipelineConfig:
        cfg = PipelineConfig(
            tweakables=self.tweakables,
            alignment=self.alignment,
            sketch=self.dir / self.sketch_name if self.sketch_name else None,
            rig=self.dir / self.manifest_name if self.manifest_name else None,
            activations=(
                self.dir / self.activations_name if self.activations_name else None
            ),
            out_dir=self.dir / "out",
            image_width=self.image_width,
            image_height=self.image_height,
        )
        cfg.validate()
        return cfg

    def view(self) -> dict:
        job = self.jobs.get(self.current_job) if self.current_job else None
        return {
            "session_id": self.id,
            "assets": sorted(self.assets.keys()),
            "alignment": {
                "tx": self.alignment.tx,
                "ty": self.alignment.ty,
                "scale": self.alignment.scale,
            },
            "tweakables": _tweakables_dict(self.tweakables),
            "image_width": self.image_width,
            "image_height": self.image_height,
            "job": job.view() if job else None,
        }


def _safe_name(name: str) -> str:
    if not name or "/" in name or "\\" in name or name.startswith(".") or ".." in name:
        raise ConfigError(f"unacceptable asset name '{name}'")
    return name


def _snakes_result(art: PipelineArtifacts) -> dict:
    snakes = art.snakes
    deltas = art.deltas
    overlay = _png_b64(snake_overlay(art.reference, snakes.pairs))
    dm = _png_b64(delta_map(deltas, art.reference.width, art.reference.height))
    return {
        "contours": len(art.contours),
        "snakes_run": len(snakes.pairs),
        "snakes_skipped": len(snakes.skips),
        "skips": [
            {"contour_index": s.contour_index, "reason": s.reason} for s in snakes.skips
        ],
        "samples_total": deltas.samples_total,
        "samples_rejected": deltas.samples_rejected,
        "delta_pixels": len(deltas.entries),
        "overlay_b64": overlay,
        "delta_map_b64": dm,
        "width": art.reference.width,
        "height": art.reference.height,
    }


def create_app() -> FastAPI:
    app = FastAPI(title="sketchdeform", version="0.1.0")
    sessions: dict[str, Session] = {}
    store_lock = threading.Lock()
    base_dir = Path(tempfile.mkdtemp(prefix="sketchdeform-sessions-"))

    def _session(sid: str) -> Session:
        with store_lock:
            sess = sessions.get(sid)
        if sess is None:
            raise HTTPException(status_code=404, detail=f"no session '{sid}'")
        return sess

    def _job(sess: Session, jid: str) -> Job:
        job = sess.jobs.get(jid)
        if job is None:
            raise HTTPException(status_code=404, detail=f"no job '{jid}'")
        return job

    @app.post("/v1/sessions")
    def create_session(payload: dict = Body(default={})) -> dict:
        sid = secrets.token_hex(8)
        sdir = base_dir / sid
        sdir.mkdir(parents=True)
        sess = Session(id=sid, dir=sdir)
        try:
            if "image_width" in payload:
                sess.image_width = int(payload["image_width"])
            if "image_height" in payload:
                sess.image_height = int(payload["image_height"])
            if sess.image_width <= 0 or sess.image_height <= 0:
                raise ConfigError("image size must be positive")
        except (ValueError, ConfigError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        with store_lock:
            sessions[sid] = sess
        return {"session_id": sid}

    @app.get("/v1/sessions/{sid}")
    def get_session(sid: str) -> dict:
        sess = _session(sid)
        with sess.lock:
            return sess.view()

    @app.delete("/v1/sessions/{sid}")
    def delete_session(sid: str) -> dict:
        sess = _session(sid)
        with sess.lock:
            if sess.current_job:
                job = sess.jobs.get(sess.current_job)
                if job and job.status in ("queued", "running"):
                    job.cancel.set()
        with store_lock:
            sessions.pop(sid, None)
        shutil.rmtree(sess.dir, ignore_errors=True)
        return {"deleted": sid}

    @app.post("/v1/sessions/{sid}/assets")
    def upload_asset(sid: str, payload: dict = Body(...)) -> dict:
        sess = _session(sid)
        kind = payload.get("kind")
        name = payload.get("name")
        data_b64 = payload.get("data_b64")
        if kind not in _ASSET_KINDS:
            raise HTTPException(
                status_code=400, detail=f"kind must be one of {_ASSET_KINDS}"
            )
        if not isinstance(name, str) or not isinstance(data_b64, str):
            raise HTTPException(status_code=400, detail="need string name and data_b64")
        try:
            clean = _safe_name(name)
            blob = base64.b64decode(data_b64, validate=True)
        except (ConfigError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        with sess.lock:
            (sess.dir / clean).write_bytes(blob)
            sess.assets[clean] = kind
            if kind == "sketch":
                sess.sketch_name = clean
            elif kind == "rig_manifest":
                sess.manifest_name = clean
            elif kind == "activations":
                sess.activations_name = clean
        return {"stored": clean, "kind": kind, "bytes": len(blob)}

    @app.get("/v1/sessions/{sid}/render")
    def render_preview(sid: str) -> dict:
        sess = _session(sid)
        with sess.lock:
            cfg = sess.config()
        if cfg.rig is None:
            raise HTTPException(status_code=409, detail="upload a rig_manifest first")
        try:
            art = execute_pipeline(cfg, until="render")
        except PipelineStageError as exc:
            raise HTTPException(
                status_code=422, detail={"stage": exc.stage, "message": str(exc.cause)}
            ) from None
        return {
            "image_b64": _png_b64(art.reference),
            "width": art.reference.width,
            "height": art.reference.height,
            "format": "png",
        }

    @app.put("/v1/sessions/{sid}/alignment")
    def set_alignment(sid: str, payload: dict = Body(...)) -> dict:
        sess = _session(sid)
        try:
            t = AlignmentTransform(
                tx=float(payload.get("tx", 0.0)),
                ty=float(payload.get("ty", 0.0)),
                scale=float(payload.get("scale", 1.0)),
            )
            t.validate()
        except (ValueError, TypeError, ConfigError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        with sess.lock:
            sess.alignment = t
            return {"tx": t.tx, "ty": t.ty, "scale": t.scale}

    @app.put("/v1/sessions/{sid}/tweakables")
    def set_tweakables(sid: str, payload: dict = Body(...)) -> dict:
        sess = _session(sid)
        try:
            with sess.lock:
                sess.tweakables = _tweakables_update(sess.tweakables, payload)
                return _tweakables_dict(sess.tweakables)
        except (SketchDeformError, ValueError, TypeError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None

    def _start_job(sess: Session, kind: str) -> dict:
        with sess.lock:
            if sess.current_job:
                existing = sess.jobs.get(sess.current_job)
                if existing and existing.status in ("queued", "running"):
                    raise HTTPException(
                        status_code=409,
                        detail=f"job '{existing.id}' is {existing.status}; "
                        "one job per session at a time",
                    )
            cfg = sess.config()
            if cfg.rig is None or cfg.sketch is None:
                raise HTTPException(
                    status_code=409, detail="upload a sketch and a rig_manifest first"
                )
            job = Job(id=secrets.token_hex(6), kind=kind)
            sess.jobs[job.id] = job
            sess.current_job = job.id

        def _run() -> None:
            job.status = "running"
            try:
                if kind == "snakes":
                    art = execute_pipeline(cfg, until="deltas", cancel=job.cancel)
                    job.result = _snakes_result(art)
                else:
                    report = run_pipeline(
                        cfg.sketch,
                        cfg.rig,
                        cfg.activations,
                        cfg.alignment,
                        cfg.tweakables,
                        cfg.out_dir,
                        cfg.image_size,
                    )
                    obj_text = (cfg.out_dir / "output.obj").read_text(encoding="utf-8")
                    job.result = {
                        "report": {
                            "contours": report.contours,
                            "snakes_run": report.snakes_run,
                            "snakes_skipped": report.snakes_skipped,
                            "samples_total": report.samples_total,
                            "samples_rejected": report.samples_rejected,
                            "delta_pixels": report.delta_pixels,
                            "displaced_vertices": report.displaced_vertices,
                            "timings": report.timings,
                        },
                        "report_text": report.to_text(),
                        "obj_text": obj_text,
                        "outputs": report.outputs,
                    }
                job.status = "done"
            except JobCancelled:
                job.status = "cancelled"
            except PipelineStageError as exc:
                job.status = "failed"
                job.error = {"stage": exc.stage, "message": str(exc.cause)}
            except Exception as exc:  # keep the worker from dying silently
                job.status = "failed"
                job.error = {"stage": "internal", "message": str(exc)}

        job.thread = threading.Thread(target=_run, daemon=True)
        job.thread.start()
        return {"job_id": job.id}

    @app.post("/v1/sessions/{sid}/jobs/snakes")
    def start_snakes(sid: str) -> dict:
        return _start_job(_session(sid), "snakes")

    @app.post("/v1/sessions/{sid}/jobs/deform")
    def start_deform(sid: str) -> dict:
        return _start_job(_session(sid), "deform")

    @app.get("/v1/sessions/{sid}/jobs/{jid}")
    def job_status(sid: str, jid: str) -> dict:
        sess = _session(sid)
        with sess.lock:
            return _job(sess, jid).view()

    @app.post("/v1/sessions/{sid}/jobs/{jid}/cancel")
    def cancel_job(sid: str, jid: str) -> dict:
        sess = _session(sid)
        with sess.lock:
            job = _job(sess, jid)
            if job.status in ("queued", "running"):
                job.cancel.set()
            return job.view()

    @app.get("/v1/sessions/{sid}/config", response_class=PlainTextResponse)
    def export_config(sid: str) -> str:
        sess = _session(sid)
        with sess.lock:
            return config_to_text(sess.config())

    return app


app = create_app()
