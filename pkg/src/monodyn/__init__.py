"""Novel space-time view rendering of dynamic scenes from monocular video priors."""

from .compositor import RenderOutput, blend, psnr, ssim
from .config import PipelineConfig
from .errors import MonodynError
from .evaluation import MetricReport, aggregate, evaluate_dirs
from .geometry import CameraModel, interpolate_bilinear, lift, project
from .masks import MaskConfig, propagate_masks, propagate_scene_masks
from .pipeline import render_job, render_view
from .scene_io import Scene, align_depth_scale_shift, load_scene, save_scene
from .synthetic import SyntheticConfig, build_scene, gen_synthetic

__version__ = "0.1.0"

__all__ = [
    "CameraModel",
    "MaskConfig",
    "MetricReport",
    "MonodynError",
    "PipelineConfig",
    "RenderOutput",
    "Scene",
    "SyntheticConfig",
    "aggregate",
    "align_depth_scale_shift",
    "blend",
    "build_scene",
    "evaluate_dirs",
    "gen_synthetic",
    "interpolate_bilinear",
    "lift",
    "load_scene",
    "project",
    "propagate_masks",
    "propagate_scene_masks",
    "psnr",
    "render_job",
    "render_view",
    "save_scene",
    "ssim",
]
