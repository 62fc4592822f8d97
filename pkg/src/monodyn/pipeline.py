"""End-to-end rendering of one target view: dynamic branch, static branch, blend."""

from __future__ import annotations

import json
import logging
from dataclasses import replace
from pathlib import Path

import numpy as np

from .compositor import RenderOutput, blend
from .config import PipelineConfig
from .dynamic import (
    build_paired_cloud,
    interpolate_cloud,
    merge_clouds,
    remove_outliers,
    render_mesh,
    render_points,
    render_splat,
    select_temporal_neighbors,
)
from .errors import InvalidArgumentError, MissingFileError, MonodynError, SceneValidationError
from .geometry import CameraModel
from .scene_io import write_mask, write_raster, write_rgb
from .static import EpipolarAggregator, render_static_pointcloud, select_source_views
from .tracks import build_track_cloud, lift_tracks, temporal_window

logger = logging.getLogger(__name__)


def dynamic_cloud(scene, t_tgt, cfg: PipelineConfig):
    """Target-time cloud of dynamic content (tracks merged, outliers removed)."""
    i_minus, i_plus = select_temporal_neighbors(scene.times, t_tgt)
    f_minus, f_plus = scene.frames[i_minus], scene.frames[i_plus]
    if i_minus == i_plus:
        paired = build_paired_cloud(f_minus, f_minus, i_minus=i_minus)
    else:
        paired = build_paired_cloud(
            f_minus, f_plus,
            scene.flow(i_minus, i_plus).flow, scene.flow(i_plus, i_minus).flow,
            cfg.cycle_abs_tol, cfg.cycle_rel_tol, i_minus=i_minus, i_plus=i_plus,
        )
    cloud = interpolate_cloud(paired, f_minus.time, f_plus.time, t_tgt)
    if cfg.use_tracks and scene.tracks is not None:
        window = temporal_window(scene.times, t_tgt, cfg.n_temporal)
        trajs = lift_tracks(scene.tracks, scene, window)
        cloud = merge_clouds(cloud, build_track_cloud(trajs, scene, t_tgt))
    if cfg.remove_outliers:
        cloud = remove_outliers(cloud, cfg.outlier)
    logger.debug("dynamic cloud at t=%s: %d paired, %d kept", t_tgt, len(paired), len(cloud))
    return cloud


def render_dynamic(cloud, camera, cfg: PipelineConfig):
    if cfg.dyn_renderer == "splat":
        r = render_splat(cloud, camera, cfg.splat)
        return r.rgb, r.mask, {"splat_weight": r.weight}
    if cfg.dyn_renderer == "points":
        r = render_points(cloud, camera, cfg.points)
        return r.rgb, r.mask, {}
    r = render_mesh(cloud, camera)
    return r.rgb, r.mask, {}


def effective_selection(cfg: PipelineConfig, n_frames):
    """Selection config clamped to the number of available frames."""
    sel = cfg.selection
    n_spatial = min(sel.n_spatial, n_frames)
    n_cluster = min(sel.n_cluster, n_frames)
    if n_spatial != sel.n_spatial or n_cluster != sel.n_cluster:
        logger.info("scene has %d frames; using n_spatial=%d, n_cluster=%d", n_frames, n_spatial, n_cluster)
    return replace(sel, n_spatial=n_spatial, n_cluster=max(n_cluster, n_spatial))


def render_static(scene, camera, t_tgt, cfg: PipelineConfig):
    sel = select_source_views(scene.cameras, scene.times, camera, t_tgt, effective_selection(cfg, len(scene)))
    views = [scene.frames[i] for i in sel]
    if cfg.static_backend == "points":
        rgb, cov = render_static_pointcloud(views, camera, cfg.static_stride, cfg.points)
        return rgb, cov, {}
    agg = EpipolarAggregator(cfg.aggregator)
    rgb, cov, sigma = agg.render_image(camera, views)
    diag = {f"sigma_p{p}": sigma[..., p] for p in range(sigma.shape[-1])}
    return rgb, cov, diag


def render_view(scene, camera: CameraModel, t_tgt, cfg: PipelineConfig = PipelineConfig()) -> RenderOutput:
    """Render ``scene`` from ``camera`` at time ``t_tgt``."""
    cloud = dynamic_cloud(scene, t_tgt, cfg)
    dyn_rgb, dyn_mask, dyn_diag = render_dynamic(cloud, camera, cfg)
    st_rgb, st_cov, st_diag = render_static(scene, camera, t_tgt, cfg)
    out = blend(st_rgb, st_cov, dyn_rgb, dyn_mask, cfg.background)
    out.diagnostics.update(dyn_diag)
    out.diagnostics.update(st_diag)
    out.diagnostics["static_coverage"] = st_cov.astype(np.float64)
    return out


def load_targets(path):
    """Target list file: JSON array of ``{time, K, E, width, height}`` records."""
    path = Path(path)
    try:
        records = json.loads(path.read_text())
        return [(CameraModel.from_record(r), float(r["time"])) for r in records]
    except FileNotFoundError:
        raise MissingFileError(f"missing targets file {path}", path=path) from None
    except (ValueError, KeyError, TypeError) as exc:
        raise SceneValidationError(f"malformed targets file: {exc}", path=path) from None


def write_output(out_dir, index, result: RenderOutput, emit_diagnostics=False):
    out_dir = Path(out_dir)
    for sub in ("rgb", "dyn_mask", "hole_mask"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)
    write_rgb(out_dir / "rgb" / f"{index:05d}.png", result.rgb)
    write_mask(out_dir / "dyn_mask" / f"{index:05d}.png", result.dyn_mask)
    write_mask(out_dir / "hole_mask" / f"{index:05d}.png", result.hole_mask)
    if emit_diagnostics:
        (out_dir / "diag").mkdir(exist_ok=True)
        for name, raster in sorted(result.diagnostics.items()):
            write_raster(out_dir / "diag" / f"{index:05d}_{name}.pgdv", "feat", raster)


def render_job(scene, targets, out_dir, cfg: PipelineConfig = PipelineConfig(), workers=1):
    """Render every ``(camera, time)`` target and write the results under ``out_dir``."""
    times = scene.times
    for k, (cam, t) in enumerate(targets):
        if not times[0] <= t <= times[-1]:
            raise InvalidArgumentError(f"target {k}: time {t} outside [{times[0]}, {times[-1]}]", frame=k)

    def one(k):
        cam, t = targets[k]
        try:
            res = render_view(scene, cam, t, cfg)
        except MonodynError as exc:
            if exc.frame is None:
                exc.frame = k
            raise
        write_output(out_dir, k, res, cfg.emit_diagnostics)
        logger.info("rendered target %d (t=%s): %d holes", k, t, int(res.hole_mask.sum()))
        return res

    if workers <= 1:
        return [one(k) for k in range(len(targets))]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, range(len(targets))))
