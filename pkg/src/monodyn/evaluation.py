"""Per-frame metrics and scene-balanced aggregation."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .compositor import psnr, ssim
from .errors import InvalidArgumentError, MissingFileError
from .scene_io import read_mask, read_rgb

METRICS = ("psnr_full", "ssim_full", "psnr_dynamic", "ssim_dynamic", "psnr_static", "ssim_static")


@dataclass
class FrameMetrics:
    scene: str
    frame: int
    psnr_full: float
    ssim_full: float
    psnr_dynamic: float
    ssim_dynamic: float
    psnr_static: float
    ssim_static: float


@dataclass
class MetricReport:
    frames: list
    scene_means: dict            # scene -> {metric: mean over frames}
    overall: dict                # metric -> mean over scenes
    unavailable: list = field(default_factory=lambda: ["lpips", "mlpips"])

    def to_dict(self):
        return {
            "overall": self.overall,
            "scenes": self.scene_means,
            "frames": [asdict(f) for f in self.frames],
            "unavailable": self.unavailable,
        }

    def write_json(self, path):
        Path(path).write_text(json.dumps(_jsonable(self.to_dict()), indent=2))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["scene", "frame", *METRICS])
            for f in self.frames:
                w.writerow([f.scene, f.frame, *(getattr(f, m) for m in METRICS)])


def _jsonable(obj):
    if isinstance(obj, float) and math.isnan(obj):
        return None
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_jsonable(v) for v in obj]
    return obj


def _nanmean(values):
    vals = [v for v in values if not math.isnan(v)]
    return float(np.mean(vals)) if vals else math.nan


def aggregate(frames) -> MetricReport:
    """Average per frame within each scene, then average the scene means.

    NaN entries (empty evaluation regions) are skipped.
    """
    frames = list(frames)
    if not frames:
        raise InvalidArgumentError("cannot aggregate an empty set of frames")
    by_scene = {}
    for f in frames:
        by_scene.setdefault(f.scene, []).append(f)
    scene_means = {s: {m: _nanmean([getattr(f, m) for f in fs]) for m in METRICS} for s, fs in by_scene.items()}
    overall = {m: _nanmean([sm[m] for sm in scene_means.values()]) for m in METRICS}
    return MetricReport(frames, scene_means, overall)


def evaluate_frame(scene, frame, rendered, gt, gt_dyn_mask, coverage=None) -> FrameMetrics:
    """Full / dynamic / static metrics, using the ground-truth dynamic mask."""
    dyn = np.asarray(gt_dyn_mask, dtype=bool)
    return FrameMetrics(
        scene, frame,
        psnr(rendered, gt, coverage=coverage), ssim(rendered, gt, coverage=coverage),
        psnr(rendered, gt, dyn, coverage), ssim(rendered, gt, dyn, coverage),
        psnr(rendered, gt, ~dyn, coverage), ssim(rendered, gt, ~dyn, coverage),
    )


def evaluate_dirs(pairs, eval_coverage=False) -> MetricReport:
    """Evaluate ``(rendered_dir, gt_dir)`` pairs, one scene per pair.

    Frames are the ``rgb/*.png`` files of the ground-truth directory. Dynamic
    masks come from ``gt_dir/mask``; with ``eval_coverage`` the rendered
    ``hole_mask`` restricts the evaluated pixels.
    """
    frames = []
    for rendered_dir, gt_dir in pairs:
        rendered_dir, gt_dir = Path(rendered_dir), Path(gt_dir)
        scene = rendered_dir.name
        gt_files = sorted((gt_dir / "rgb").glob("*.png"))
        if not gt_files:
            raise MissingFileError(f"no ground-truth frames in {gt_dir / 'rgb'}", path=gt_dir)
        for gp in gt_files:
            idx = int(gp.stem)
            rp = rendered_dir / "rgb" / gp.name
            gt = read_rgb(gp)
            out = read_rgb(rp)
            dyn = read_mask(gt_dir / "mask" / gp.name)
            coverage = None
            if eval_coverage:
                coverage = ~read_mask(rendered_dir / "hole_mask" / gp.name)
            frames.append(evaluate_frame(scene, idx, out, gt, dyn, coverage))
    return aggregate(frames)
