"""Streaming refinement of per-frame dynamic masks.

Raw single-frame masks are ANDed with a flow-propagated history of how often
each pixel was classified dynamic, then optionally snapped to whole segments
of a class-agnostic segmentation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, InvalidArgumentError, MissingFlowError
from .geometry import interpolate_bilinear, pixel_grid


@dataclass(frozen=True)
class MaskConfig:
    history_threshold: float = 0.5
    segment_overlap: float = 0.10

    def __post_init__(self):
        for name in ("history_threshold", "segment_overlap"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidArgumentError(f"{name} must lie in [0, 1], got {v}")


@dataclass(eq=False)
class MaskHistory:
    """Per-pixel count of frames classified dynamic, over ``frame_count`` frames."""

    accumulator: np.ndarray
    frame_count: int

    @classmethod
    def start(cls, mask):
        return cls(np.asarray(mask, dtype=np.float64).copy(), 1)

    def ratio(self, warped):
        return warped / self.frame_count

    def update(self, warped, mask):
        return MaskHistory(warped + np.asarray(mask, dtype=np.float64), self.frame_count + 1)


def warp_history(prev: MaskHistory, flow_to_prev) -> np.ndarray:
    """Carry the history raster of frame i-1 onto frame i's lattice.

    ``flow_to_prev`` is the i -> i-1 flow; every pixel ``u`` of frame i samples
    the previous accumulator at ``u + flow(u)`` (bilinear, border-clamped).
    """
    flow = np.asarray(flow_to_prev, dtype=np.float64)
    acc = prev.accumulator
    if flow.shape != acc.shape + (2,):
        raise DimensionMismatchError(f"flow of shape {flow.shape} does not match history {acc.shape}")
    coords = pixel_grid(*acc.shape) + flow
    return interpolate_bilinear(acc, coords)


def fuse_segments(mask, segment_map, overlap=0.10) -> np.ndarray:
    """Union of the segments whose overlap fraction with ``mask`` exceeds ``overlap``.

    Label 0 marks pixels outside every segment and is never selected.
    """
    mask = np.asarray(mask, dtype=bool)
    labels = np.asarray(segment_map)
    if labels.shape != mask.shape:
        raise DimensionMismatchError(f"segment map {labels.shape} does not match mask {mask.shape}")
    if labels.size == 0:
        return mask.copy()
    if labels.min() < 0:
        raise InvalidArgumentError("segment labels must be non-negative")
    flat = labels.ravel()
    size = np.bincount(flat)
    hits = np.bincount(flat, weights=mask.ravel().astype(np.float64), minlength=len(size))
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(size > 0, hits / np.maximum(size, 1), 0.0)
    keep = frac > overlap
    keep[0] = False
    return keep[labels]


def propagate_masks(raw_masks, flows_to_prev, segments=None, cfg: MaskConfig = MaskConfig()):
    """Refine a sequence of raw masks.

    Args:
        raw_masks: sequence of H x W binary masks.
        flows_to_prev: sequence aligned with ``raw_masks``; entry ``i`` (i >= 1)
            is the H x W x 2 flow from frame i to frame i-1. Entry 0 is ignored.
        segments: optional sequence of H x W label maps.
        cfg: thresholds.

    Returns:
        list of refined boolean masks.
    """
    raw = [np.asarray(m, dtype=bool) for m in raw_masks]
    if segments is not None and len(segments) != len(raw):
        raise InvalidArgumentError("segments must have one label map per frame")

    def finalize(i, m):
        if segments is None:
            return m
        return fuse_segments(m, segments[i], cfg.segment_overlap)

    out = []
    history = None
    for i, m_hat in enumerate(raw):
        if i == 0:
            m = finalize(0, m_hat)
            history = MaskHistory.start(m)
            out.append(m)
            continue
        flow = flows_to_prev[i] if i < len(flows_to_prev) else None
        if flow is None:
            raise MissingFlowError(f"no flow from frame {i} to frame {i - 1}", frame=i)
        warped = warp_history(history, flow)
        m = finalize(i, m_hat & (history.ratio(warped) >= cfg.history_threshold))
        history = history.update(warped, m)
        out.append(m)
    return out


def propagate_scene_masks(scene, cfg: MaskConfig = MaskConfig(), use_segments=True):
    """Run :func:`propagate_masks` on a loaded scene's masks, flows and segments."""
    n = len(scene)
    flows = [None] + [scene.flow(i, i - 1).flow for i in range(1, n)]
    segs = scene.segments if use_segments else None
    return propagate_masks([f.dynamic_mask for f in scene.frames], flows, segs, cfg)
