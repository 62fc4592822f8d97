"""Dynamic-content rendering from flow-paired depth lifts."""

from .cloud import (
    PairedPointCloud,
    TargetCloud,
    build_paired_cloud,
    check_cycle,
    interpolate_cloud,
    merge_clouds,
    select_temporal_neighbors,
)
from .mesh import render_mesh
from .outliers import OutlierConfig, outlier_mask, remove_outliers
from .points import PointRenderConfig, render_points
from .splat import SplatConfig, render_splat

__all__ = [
    "PairedPointCloud",
    "TargetCloud",
    "build_paired_cloud",
    "check_cycle",
    "interpolate_cloud",
    "merge_clouds",
    "select_temporal_neighbors",
    "render_mesh",
    "OutlierConfig",
    "outlier_mask",
    "remove_outliers",
    "PointRenderConfig",
    "render_points",
    "SplatConfig",
    "render_splat",
]
