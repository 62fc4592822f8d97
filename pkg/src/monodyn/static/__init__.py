"""Static-content rendering backends and source-view selection."""

from .epipolar import AggregatorConfig, EpipolarAggregator, depth_bounds, masked_softmax, sample_ray
from .pointcloud import render_static_pointcloud, static_cloud
from .selection import SourceSelectionConfig, kmeans, select_source_views

__all__ = [
    "AggregatorConfig",
    "EpipolarAggregator",
    "depth_bounds",
    "masked_softmax",
    "sample_ray",
    "render_static_pointcloud",
    "static_cloud",
    "SourceSelectionConfig",
    "kmeans",
    "select_source_views",
]
