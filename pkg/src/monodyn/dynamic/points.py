"""Point rasterization with front-to-back alpha compositing."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..errors import InvalidArgumentError
from ..geometry import project

MASK_EPS = 1e-3
OPAQUE = 0.999
_CHUNK = 65536


@dataclass(frozen=True)
class PointRenderConfig:
    # screen-space radius; 1.0 spans half of the shorter image side
    radius: float = 0.01

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidArgumentError("point radius must be positive")


class PointRenderResult(NamedTuple):
    rgb: np.ndarray
    mask: np.ndarray
    alpha: np.ndarray


def pixel_radius(radius, width, height):
    return radius * min(width, height) / 2.0


def _fragments(uv, depth, r_px, width, height):
    """Pixels whose centers fall strictly inside each projected disk."""
    reach = int(np.ceil(r_px))
    offs = np.arange(-reach, reach + 2)
    ox, oy = np.meshgrid(offs, offs)
    ox, oy = ox.ravel(), oy.ravel()
    out_pt, out_pix, out_alpha, out_depth = [], [], [], []
    for start in range(0, len(uv), _CHUNK):
        sl = slice(start, start + _CHUNK)
        x, y = uv[sl, 0], uv[sl, 1]
        px = np.floor(x)[:, None] + ox
        py = np.floor(y)[:, None] + oy
        rho2 = (px - x[:, None]) ** 2 + (py - y[:, None]) ** 2
        ok = (rho2 < r_px * r_px) & (px >= 0) & (px < width) & (py >= 0) & (py < height)
        pt = np.broadcast_to(np.arange(start, start + len(x))[:, None], ok.shape)[ok]
        out_pt.append(pt)
        out_pix.append((py[ok] * width + px[ok]).astype(np.intp))
        out_alpha.append(1.0 - rho2[ok] / (r_px * r_px))
        out_depth.append(depth[pt])
    if not out_pt:
        empty = np.zeros(0)
        return empty.astype(np.intp), empty.astype(np.intp), empty, empty
    return (np.concatenate(out_pt), np.concatenate(out_pix),
            np.concatenate(out_alpha), np.concatenate(out_depth))


def composite_fragments(pix, depth, alpha, colors, n_pixels, tiebreak=None):
    """Front-to-back over-compositing of per-pixel fragment lists.

    Fragments are ordered by depth, then by decreasing alpha (the fragment
    nearest its disk center first), then ``tiebreak``; a pixel stops taking
    fragments once its accumulated alpha reaches ``OPAQUE``. The color is
    normalized by the accumulated alpha.

    Returns ``(rgb (n_pixels, 3), accumulated_alpha (n_pixels,))``.
    """
    rgb = np.zeros((n_pixels, 3))
    trans = np.ones(n_pixels)
    if len(pix) == 0:
        return rgb, 1.0 - trans
    keys = [-alpha, depth, pix] if tiebreak is None else [tiebreak, -alpha, depth, pix]
    order = np.lexsort(keys)
    pix_s = pix[order]
    start = np.r_[0, np.nonzero(np.diff(pix_s))[0] + 1]
    group = np.repeat(start, np.diff(np.r_[start, len(pix_s)]))
    rank = np.arange(len(pix_s)) - group
    by_rank = np.argsort(rank, kind="stable")
    bounds = np.searchsorted(rank[by_rank], np.arange(rank.max() + 2))
    for r in range(rank.max() + 1):
        sel = order[by_rank[bounds[r]:bounds[r + 1]]]
        p = pix[sel]
        t = trans[p]
        live = (1.0 - t) < OPAQUE
        w = np.where(live, alpha[sel] * t, 0.0)
        rgb[p] += w[:, None] * colors[sel]
        trans[p] = np.where(live, t * (1.0 - alpha[sel]), t)
    acc = 1.0 - trans
    hit = acc > 0
    rgb[hit] /= acc[hit, None]
    return rgb, acc


def render_points(cloud, camera, cfg: PointRenderConfig = PointRenderConfig()) -> PointRenderResult:
    """Rasterize each point as a screen-space disk with ``alpha = 1 - (rho / r)^2``."""
    H, W = camera.height, camera.width
    if len(cloud) == 0:
        return PointRenderResult(np.zeros((H, W, 3)), np.zeros((H, W), dtype=bool), np.zeros((H, W)))
    proj = project(camera, cloud.positions)
    front = np.nonzero(proj.in_front)[0]
    r_px = pixel_radius(cfg.radius, W, H)
    pt, pix, alpha, depth = _fragments(proj.uv[front], proj.depth[front], r_px, W, H)
    src = front[pt]
    rgb, acc = composite_fragments(pix, depth, alpha, cloud.colors[src], H * W, tiebreak=src)
    return PointRenderResult(rgb.reshape(H, W, 3), (acc > MASK_EPS).reshape(H, W), acc.reshape(H, W))
