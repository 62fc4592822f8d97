"""Command-line interface.

Every failure is reported as a single JSON object on stderr and a nonzero
exit status; the object names the offending file or frame when known.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import DYN_RENDERERS, STATIC_BACKENDS, PipelineConfig
from .errors import InvalidArgumentError, MissingFileError, MonodynError
from .evaluation import evaluate_dirs
from .masks import propagate_scene_masks
from .pipeline import load_targets, render_job
from .scene_io import align_depth_scale_shift, apply_scale_shift, load_scene, read_raster, write_mask, write_raster
from .synthetic import SyntheticConfig, config_from_dict, gen_synthetic

logger = logging.getLogger("monodyn")

EXIT_ERROR = 1


def _cmd_gen_synthetic(args):
    cfg = SyntheticConfig()
    if args.config:
        try:
            cfg = config_from_dict(json.loads(Path(args.config).read_text()))
        except (OSError, ValueError, TypeError) as exc:
            raise InvalidArgumentError(f"cannot read synthetic config: {exc}", path=args.config) from None
    if args.size:
        # keep the field of view, so the scene looks the same at any size
        cfg = replace(cfg, width=args.size, height=args.size, focal=cfg.focal * args.size / cfg.width)
    if args.frames:
        cfg = replace(cfg, n_frames=args.frames)
    gen_synthetic(cfg, args.out, with_tracks=not args.no_tracks, with_segments=not args.no_segments)
    return {"scene": str(args.out), "frames": cfg.n_frames}


def _pipeline_config(args):
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    return cfg.override(
        dyn_renderer=args.dyn_renderer,
        static_backend=args.static_backend,
        use_tracks=True if args.use_tracks else None,
        emit_diagnostics=True if args.emit_diagnostics else None,
        selection__strategy=args.select,
        selection__n_spatial=args.n_spatial,
        selection__rng_seed=args.seed,
    )


def _cmd_render(args):
    cfg = _pipeline_config(args)
    scene = load_scene(args.scene)
    targets = load_targets(args.targets)
    results = render_job(scene, targets, args.out, cfg, workers=args.workers)
    (Path(args.out) / "config.json").write_text(json.dumps(cfg.to_dict(), indent=1))
    return {"rendered": len(results), "holes": [int(r.hole_mask.sum()) for r in results]}


def _cmd_evaluate(args):
    report = evaluate_dirs(args.pair, eval_coverage=args.eval_coverage == "on")
    if args.out:
        report.write_json(args.out)
    if args.csv:
        report.write_csv(args.csv)
    return {k: (None if np.isnan(v) else v) for k, v in report.overall.items()}


def _cmd_propagate_masks(args):
    from .masks import MaskConfig

    cfg = MaskConfig()
    if args.threshold is not None or args.overlap is not None:
        cfg = MaskConfig(
            history_threshold=cfg.history_threshold if args.threshold is None else args.threshold,
            segment_overlap=cfg.segment_overlap if args.overlap is None else args.overlap,
        )
    scene = load_scene(args.scene)
    refined = propagate_scene_masks(scene, cfg, use_segments=not args.no_segments)
    out = Path(args.out) if args.out else Path(args.scene) / "mask_refined"
    out.mkdir(parents=True, exist_ok=True)
    for i, m in enumerate(refined):
        write_mask(out / f"{i:05d}.png", m)
    return {"frames": len(refined), "out": str(out)}


def _read_sparse(path):
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    except FileNotFoundError:
        raise MissingFileError(f"missing sparse depth file {path}", path=path) from None
    if rows and not _is_number(rows[0][0]):
        rows = rows[1:]
    try:
        return np.array([[float(v) for v in r[:3]] for r in rows], dtype=np.float64).reshape(-1, 3)
    except (ValueError, IndexError):
        raise InvalidArgumentError("sparse depth rows must be x,y,depth", path=path) from None


def _is_number(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def _cmd_align_depth(args):
    from .geometry import interpolate_bilinear

    kind, pred = read_raster(args.pred)
    if kind != "depth":
        raise InvalidArgumentError(f"expected a depth raster, got {kind!r}", path=args.pred)
    sparse = _read_sparse(args.sparse)
    samples = interpolate_bilinear(pred[..., 0], sparse[:, :2])
    scale, shift = align_depth_scale_shift(samples, sparse[:, 2])
    write_raster(args.out, "depth", apply_scale_shift(pred, scale, shift))
    result = {"scale": scale, "shift": shift}
    if args.json:
        Path(args.json).write_text(json.dumps(result))
    return result


def build_parser():
    p = argparse.ArgumentParser(prog="monodyn", description="Novel space-time view rendering of dynamic scenes.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-synthetic", help="write the analytic test scene")
    g.add_argument("--out", required=True, type=Path)
    g.add_argument("--config", type=Path, help="JSON with SyntheticConfig fields")
    g.add_argument("--size", type=int)
    g.add_argument("--frames", type=int)
    g.add_argument("--no-tracks", action="store_true")
    g.add_argument("--no-segments", action="store_true")
    g.set_defaults(func=_cmd_gen_synthetic)

    r = sub.add_parser("render", help="render target views of a scene bundle")
    r.add_argument("--scene", required=True, type=Path)
    r.add_argument("--targets", required=True, type=Path)
    r.add_argument("--out", required=True, type=Path)
    r.add_argument("--config", type=Path)
    r.add_argument("--dyn-renderer", choices=DYN_RENDERERS)
    r.add_argument("--static-backend", choices=STATIC_BACKENDS)
    r.add_argument("--select", choices=("window", "cluster"))
    r.add_argument("--n-spatial", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--use-tracks", action="store_true")
    r.add_argument("--emit-diagnostics", action="store_true")
    r.add_argument("--workers", type=int, default=1)
    r.set_defaults(func=_cmd_render)

    e = sub.add_parser("evaluate", help="compute metrics of rendered views against ground truth")
    e.add_argument("--pair", nargs=2, action="append", required=True, metavar=("RENDERED", "GT"))
    e.add_argument("--eval-coverage", choices=("on", "off"), default="off")
    e.add_argument("--out", type=Path, help="JSON report")
    e.add_argument("--csv", type=Path, help="per-frame CSV")
    e.set_defaults(func=_cmd_evaluate)

    m = sub.add_parser("propagate-masks", help="refine dynamic masks over time")
    m.add_argument("--scene", required=True, type=Path)
    m.add_argument("--out", type=Path)
    m.add_argument("--threshold", type=float)
    m.add_argument("--overlap", type=float)
    m.add_argument("--no-segments", action="store_true")
    m.set_defaults(func=_cmd_propagate_masks)

    a = sub.add_parser("align-depth", help="fit scale and shift of a depth map to sparse depths")
    a.add_argument("--pred", required=True, type=Path)
    a.add_argument("--sparse", required=True, type=Path, help="CSV rows x,y,depth")
    a.add_argument("--out", required=True, type=Path)
    a.add_argument("--json", type=Path)
    a.set_defaults(func=_cmd_align_depth)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        result = args.func(args)
    except MonodynError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "path": exc.filename}), file=sys.stderr)
        return EXIT_ERROR
    print(json.dumps(result))
    return 0


if __name__ == "__main__":
    sys.exit(main())
