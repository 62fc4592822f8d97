"""Softmax forward splatting of a colored cloud into a target view."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..errors import InvalidArgumentError
from ..geometry import project

MASK_EPS = 1e-3


@dataclass(frozen=True)
class SplatConfig:
    alpha: float = 100.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise InvalidArgumentError("splat alpha must be positive")


class SplatResult(NamedTuple):
    rgb: np.ndarray
    mask: np.ndarray
    weight: np.ndarray  # accumulated bilinear kernel weight


def bilinear_footprint(uv, width, height):
    """Expand continuous coordinates into their four neighbor pixels.

    Returns ``(point_index, flat_pixel, kernel_weight)`` restricted to in-image
    pixels with positive weight.
    """
    x, y = uv[:, 0], uv[:, 1]
    x0 = np.floor(x)
    y0 = np.floor(y)
    fx = x - x0
    fy = y - y0
    idx = np.arange(len(uv))
    parts = []
    for dx, dy, k in ((0, 0, (1 - fx) * (1 - fy)), (1, 0, fx * (1 - fy)),
                      (0, 1, (1 - fx) * fy), (1, 1, fx * fy)):
        px = x0 + dx
        py = y0 + dy
        ok = (k > 0) & (px >= 0) & (px < width) & (py >= 0) & (py < height)
        parts.append((idx[ok], (py[ok] * width + px[ok]).astype(np.intp), k[ok]))
    return tuple(np.concatenate(p) for p in zip(*parts))


def render_splat(cloud, camera, cfg: SplatConfig = SplatConfig()) -> SplatResult:
    """Forward-splat ``cloud`` with depth-based softmax importance.

    Each point deposits its color on its four neighboring pixels with bilinear
    weights ``k``; overlaps resolve as
    ``sum(k * exp(-alpha * d / d_scale) * c) / sum(k * exp(-alpha * d / d_scale))``
    with ``d`` the target-view depth and ``d_scale`` the median depth of the
    visible points. The exponent is shifted per pixel by its minimum depth,
    which leaves the ratio unchanged and avoids underflow.
    """
    H, W = camera.height, camera.width
    rgb = np.zeros((H * W, 3))
    weight = np.zeros(H * W)
    if len(cloud) == 0:
        return SplatResult(rgb.reshape(H, W, 3), np.zeros((H, W), dtype=bool), weight.reshape(H, W))

    proj = project(camera, cloud.positions)
    front = proj.in_front
    uv = proj.uv[front]
    depth = proj.depth[front]
    colors = cloud.colors[front]
    if len(depth) == 0:
        return SplatResult(rgb.reshape(H, W, 3), np.zeros((H, W), dtype=bool), weight.reshape(H, W))
    d_scale = float(np.median(depth))

    near = (uv[:, 0] > -1) & (uv[:, 0] < W) & (uv[:, 1] > -1) & (uv[:, 1] < H)
    uv, depth, colors = uv[near], depth[near], colors[near]
    pt, pix, k = bilinear_footprint(uv, W, H)
    d = depth[pt]

    d_min = np.full(H * W, np.inf)
    np.minimum.at(d_min, pix, d)
    w = k * np.exp(-cfg.alpha * (d - d_min[pix]) / d_scale)
    denom = np.bincount(pix, weights=w, minlength=H * W)
    for ch in range(3):
        rgb[:, ch] = np.bincount(pix, weights=w * colors[pt, ch], minlength=H * W)
    weight = np.bincount(pix, weights=k, minlength=H * W)
    covered = denom > 0
    rgb[covered] /= denom[covered, None]
    return SplatResult(rgb.reshape(H, W, 3), (weight > MASK_EPS).reshape(H, W), weight.reshape(H, W))
