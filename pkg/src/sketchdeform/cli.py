"""Command-line front end.

Every stage of the chain is runnable on its own (pose, render, preprocess,
snakes, deltas) as well as end-to-end (run / deform). `demo` fabricates a
complete sphere fixture to try the whole thing in two commands:

    sketchdeform demo --out-dir demo
    sketchdeform run --config demo/config.txt
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .errors import SketchDeformError
from .pipeline import (
    DEFAULT_IMAGE_SIZE,
    AlignmentTransform,
    PipelineConfig,
    TWEAKABLE_KEYS,
    config_from_text,
    config_to_text,
    execute_pipeline,
    persist_artifacts,
    pose_only,
    tweakables_from_pairs,
)

__all__ = ["main"]


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--sketch", help="sketch image (.png/.pgm)")
    parser.add_argument("--rig", help="rig manifest file")
    parser.add_argument("--activations", help="activation file (name = level)")
    parser.add_argument("--out-dir", help="artifact directory")
    parser.add_argument("--align-tx", type=float, help="sketch x offset in pixels")
    parser.add_argument("--align-ty", type=float, help="sketch y offset in pixels")
    parser.add_argument("--align-scale", type=float, help="sketch uniform scale")
    parser.add_argument("--width", type=int, help="working image width")
    parser.add_argument("--height", type=int, help="working image height")
    parser.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override any config key (repeatable)",
    )


def _build_config(args: argparse.Namespace) -> PipelineConfig:
    """Config file first, then dedicated flags, then --set pairs."""
    if args.config:
        path = Path(args.config)
        cfg = config_from_text(
            path.read_text(encoding="utf-8"), path.name, base_dir=path.parent
        )
    else:
        cfg = PipelineConfig()

    updates: dict[str, object] = {}
    if args.sketch:
        updates["sketch"] = Path(args.sketch)
    if args.rig:
        updates["rig"] = Path(args.rig)
    if args.activations:
        updates["activations"] = Path(args.activations)
    if args.out_dir:
        updates["out_dir"] = Path(args.out_dir)
    if args.width:
        updates["image_width"] = args.width
    if args.height:
        updates["image_height"] = args.height
    align = cfg.alignment
    if args.align_tx is not None:
        align = replace(align, tx=args.align_tx)
    if args.align_ty is not None:
        align = replace(align, ty=args.align_ty)
    if args.align_scale is not None:
        align = replace(align, scale=args.align_scale)
    if align is not cfg.alignment:
        updates["alignment"] = align
    if updates:
        cfg = replace(cfg, **updates)

    pairs: dict[str, str] = {}
    for item in args.set:
        if "=" not in item:
            raise SketchDeformError(f"--set expects KEY=VALUE, got '{item}'")
        key, value = (s.strip() for s in item.split("=", 1))
        pairs[key] = value
    if pairs:
        tw_pairs = {k: v for k, v in pairs.items() if k in TWEAKABLE_KEYS}
        cfg = replace(cfg, tweakables=tweakables_from_pairs(tw_pairs, cfg.tweakables))
        other = {k: v for k, v in pairs.items() if k not in TWEAKABLE_KEYS}
        if other:
            # Route the non-tweakable keys through the config parser.
            text = "\n".join(f"{k} = {v}" for k, v in other.items())
            partial = config_from_text(text, "--set")
            kw: dict[str, object] = {}
            if "sketch" in other:
                kw["sketch"] = partial.sketch
            if "rig" in other:
                kw["rig"] = partial.rig
            if "activations" in other:
                kw["activations"] = partial.activations
            if "out_dir" in other:
                kw["out_dir"] = partial.out_dir
            if "image_width" in other:
                kw["image_width"] = partial.image_width
            if "image_height" in other:
                kw["image_height"] = partial.image_height
            if {"align_tx", "align_ty", "align_scale"} & other.keys():
                kw["alignment"] = AlignmentTransform(
                    tx=partial.alignment.tx if "align_tx" in other else cfg.alignment.tx,
                    ty=partial.alignment.ty if "align_ty" in other else cfg.alignment.ty,
                    scale=(
                        partial.alignment.scale
                        if "align_scale" in other
                        else cfg.alignment.scale
                    ),
                )
            cfg = replace(cfg, **kw)
    cfg.validate()
    return cfg


def _run_until(args: argparse.Namespace, until: str) -> int:
    cfg = _build_config(args)
    art = execute_pipeline(cfg, until=until)
    outputs = persist_artifacts(art, cfg, cfg.out_dir)
    for name in sorted(outputs):
        print(f"{name}: {outputs[name]}")
    if art.snakes is not None:
        print(
            f"snakes: {len(art.snakes.pairs)} run, {len(art.snakes.skips)} skipped"
        )
    if art.deltas is not None:
        print(
            f"deltas: {len(art.deltas.entries)} pixels, "
            f"{art.deltas.samples_rejected}/{art.deltas.samples_total} samples rejected"
        )
    return 0


def _cmd_pose(args: argparse.Namespace) -> int:
    pose_only(args.rig, args.activations, args.out)
    print(f"posed mesh: {args.out}")
    return 0


def _cmd_render(args: argparse.Namespace) -> int:
    from .io_image import save_image
    from .mesh import ActivationVector, apply_blendshapes, load_activations, load_rig_manifest
    from .raster import CameraFront, shade_render

    rig = load_rig_manifest(args.rig)
    act = (
        load_activations(args.activations)
        if args.activations
        else ActivationVector({})
    )
    posed = apply_blendshapes(rig, act)
    cam = CameraFront(args.width or DEFAULT_IMAGE_SIZE[0], args.height or DEFAULT_IMAGE_SIZE[1])
    save_image(shade_render(posed, cam, args.ambient), args.out)
    print(f"render: {args.out}")
    return 0


def _cmd_preprocess(args: argparse.Namespace) -> int:
    from .diagnostics import binary_to_gray, contour_overlay
    from .imageproc import binarize, close_gaps, extract_contours, thin
    from .io_image import load_image, save_image

    cfg = _build_config(args)
    tw = cfg.tweakables
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    img = load_image(args.image)
    binary = close_gaps(binarize(img, tw.binarize_threshold), tw.gap_close_side)
    thinned = thin(binary, tw.thin_iterations)
    contours = extract_contours(thinned)
    save_image(binary_to_gray(binary), out / "binary.pgm")
    save_image(binary_to_gray(thinned), out / "thinned.pgm")
    save_image(contour_overlay(binary_to_gray(thinned), contours), out / "contours_overlay.pgm")
    closed = sum(1 for c in contours if c.closed)
    print(f"contours: {len(contours)} ({closed} closed) -> {out}")
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    from .pipeline import run_pipeline

    cfg = _build_config(args)
    if cfg.sketch is None or cfg.rig is None:
        raise SketchDeformError("run needs both a sketch and a rig (flags or config)")
    report = run_pipeline(
        cfg.sketch,
        cfg.rig,
        cfg.activations,
        cfg.alignment,
        cfg.tweakables,
        cfg.out_dir,
        cfg.image_size,
    )
    sys.stdout.write(report.to_text())
    return 0


def _cmd_deform(args: argparse.Namespace) -> int:
    from .mesh import save_obj

    cfg = _build_config(args)
    art = execute_pipeline(cfg)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    out_path = cfg.out_dir / "output.obj"
    save_obj(art.output, out_path)
    print(f"deformed mesh: {out_path} ({len(art.displacements)} anchor vertices)")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run("sketchdeform.service:app", host=args.host, port=args.port)
    return 0


def _cmd_demo(args: argparse.Namespace) -> int:
    from .demo import write_demo_assets

    paths = write_demo_assets(args.out_dir)
    for name in sorted(paths):
        print(f"{name}: {paths[name]}")
    print(f"next: sketchdeform run --config {paths['config']}")
    return 0


def _cmd_config(args: argparse.Namespace) -> int:
    sys.stdout.write(config_to_text(_build_config(args)))
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="sketchdeform",
        description="Deform a posed mesh to match a single-view sketch.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pose", help="apply activations to a rig and save the mesh")
    p.add_argument("--rig", required=True)
    p.add_argument("--activations")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_pose)

    p = sub.add_parser("render", help="shaded front render of the posed rig")
    p.add_argument("--rig", required=True)
    p.add_argument("--activations")
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--ambient", type=float, default=0.1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("preprocess", help="binarize, close, thin, extract contours")
    p.add_argument("--image", required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_preprocess)

    p = sub.add_parser("snakes", help="run the chain through snake evolution")
    _add_common(p)
    p.set_defaults(func=lambda a: _run_until(a, "snakes"))

    p = sub.add_parser("deltas", help="run the chain through delta collection")
    _add_common(p)
    p.set_defaults(func=lambda a: _run_until(a, "deltas"))

    p = sub.add_parser("deform", help="full chain, write only the deformed OBJ")
    _add_common(p)
    p.set_defaults(func=_cmd_deform)

    p = sub.add_parser("run", help="full chain with diagnostics and report")
    _add_common(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("config", help="print the effective configuration")
    _add_common(p)
    p.set_defaults(func=_cmd_config)

    p = sub.add_parser("serve", help="start the HTTP session service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8077)
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("demo", help="write a self-contained sphere fixture")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_demo)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SketchDeformError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
