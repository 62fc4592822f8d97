"""Static backend A: aggregate depth lifts of static pixels and render them as points."""

from __future__ import annotations

import numpy as np

from ..dynamic.cloud import TargetCloud
from ..dynamic.points import PointRenderConfig, render_points
from ..geometry import lift


def static_cloud(frames, stride=1) -> TargetCloud:
    """Union of the lifted static pixels (dynamic mask 0) of ``frames``."""
    positions, colors = [], []
    for f in frames:
        keep = ~f.dynamic_mask & np.isfinite(f.depth) & (f.depth > 0)
        if stride > 1:
            sub = np.zeros_like(keep)
            sub[::stride, ::stride] = True
            keep &= sub
        rows, cols = np.nonzero(keep)
        uv = np.stack([cols, rows], axis=-1).astype(np.float64)
        positions.append(lift(f.camera, uv, f.depth[rows, cols]))
        colors.append(f.image[rows, cols].astype(np.float64))
    if not positions:
        return TargetCloud.empty()
    return TargetCloud.from_points(np.concatenate(positions), np.concatenate(colors))


def render_static_pointcloud(frames, target_camera, stride=1, cfg: PointRenderConfig = PointRenderConfig()):
    """Render the aggregated static cloud of the given source frames.

    Returns ``(rgb, coverage)``.
    """
    result = render_points(static_cloud(frames, stride), target_camera, cfg)
    return result.rgb, result.mask
