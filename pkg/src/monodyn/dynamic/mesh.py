"""Mesh rendering of a lattice-structured cloud.

Every 2x2 block of source pixels present in the cloud becomes two triangles;
triangles straddling a depth discontinuity are dropped.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ..geometry import project

MAX_DEPTH_RATIO = 1.05
_EDGE_EPS = 1e-9


class MeshRenderResult(NamedTuple):
    rgb: np.ndarray
    mask: np.ndarray
    depth: np.ndarray


def lattice_triangles(grid_index):
    """Triangles ``(tl, tr, bl)`` and ``(tr, br, bl)`` over points with lattice indices.

    ``grid_index`` rows are ``(frame, row, col)``; rows with a negative frame
    are ignored. Returns an ``(M, 3)`` array of point indices.
    """
    grid_index = np.asarray(grid_index)
    valid = np.nonzero(grid_index[:, 0] >= 0)[0]
    if len(valid) == 0:
        return np.zeros((0, 3), dtype=np.intp)
    g = grid_index[valid]
    frames, f_inv = np.unique(g[:, 0], return_inverse=True)
    rows, cols = g[:, 1], g[:, 2]
    h, w = rows.max() + 2, cols.max() + 2
    lookup = np.full((len(frames), h, w), -1, dtype=np.intp)
    lookup[f_inv, rows, cols] = valid
    tl = lookup[f_inv, rows, cols]
    tr = lookup[f_inv, rows, cols + 1]
    bl = lookup[f_inv, rows + 1, cols]
    br = lookup[f_inv, rows + 1, cols + 1]
    quad = (tr >= 0) & (bl >= 0) & (br >= 0)
    tl, tr, bl, br = tl[quad], tr[quad], bl[quad], br[quad]
    return np.concatenate([np.stack([tl, tr, bl], 1), np.stack([tr, br, bl], 1)])


def _rasterize(tri_uv, tri_z, tri_col, W, H):
    """Z-buffered fragments of screen-space triangles (perspective-correct colors)."""
    lo = np.ceil(tri_uv.min(axis=1) - _EDGE_EPS).astype(np.int64)
    hi = np.floor(tri_uv.max(axis=1) + _EDGE_EPS).astype(np.int64)
    lo = np.maximum(lo, 0)
    hi = np.minimum(hi, [W - 1, H - 1])
    nx = np.maximum(hi[:, 0] - lo[:, 0] + 1, 0)
    ny = np.maximum(hi[:, 1] - lo[:, 1] + 1, 0)
    counts = nx * ny
    tri = np.repeat(np.arange(len(tri_uv)), counts)
    if len(tri) == 0:
        return (np.zeros(0, dtype=np.intp),) * 2 + (np.zeros(0), np.zeros((0, 3)))
    local = np.arange(len(tri)) - np.repeat(np.cumsum(counts) - counts, counts)
    px = lo[tri, 0] + local % nx[tri]
    py = lo[tri, 1] + local // nx[tri]

    a, b, c = tri_uv[tri, 0], tri_uv[tri, 1], tri_uv[tri, 2]
    area = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])

    def edge(p, q):
        return (q[:, 0] - p[:, 0]) * (py - p[:, 1]) - (q[:, 1] - p[:, 1]) * (px - p[:, 0])

    w0 = edge(b, c) / area
    w1 = edge(c, a) / area
    w2 = edge(a, b) / area
    inside = (w0 >= -_EDGE_EPS) & (w1 >= -_EDGE_EPS) & (w2 >= -_EDGE_EPS)
    tri, px, py = tri[inside], px[inside], py[inside]
    bary = np.stack([w0[inside], w1[inside], w2[inside]], axis=1).clip(0.0, None)
    bary /= bary.sum(axis=1, keepdims=True)
    inv_z = bary / tri_z[tri]
    z = 1.0 / inv_z.sum(axis=1)
    col = np.einsum("nk,nkc->nc", inv_z, tri_col[tri]) * z[:, None]
    return tri, (py * W + px).astype(np.intp), z, col


def render_mesh(cloud, camera, max_depth_ratio=MAX_DEPTH_RATIO) -> MeshRenderResult:
    """Rasterize the lattice mesh of ``cloud`` with a z-buffer.

    Points without lattice topology (e.g. track points) are ignored.
    """
    H, W = camera.height, camera.width
    rgb = np.zeros((H * W, 3))
    zbuf = np.full(H * W, np.inf)
    mask = np.zeros(H * W, dtype=bool)
    tris = lattice_triangles(cloud.grid_index) if len(cloud) else np.zeros((0, 3), dtype=np.intp)
    if len(tris):
        proj = project(camera, cloud.positions)
        z = proj.depth[tris]
        ok = np.all(z > 0, axis=1)
        ok[ok] = z[ok].max(axis=1) <= max_depth_ratio * z[ok].min(axis=1)
        tris = tris[ok]
    if len(tris):
        tri_uv = proj.uv[tris]
        a, b, c = tri_uv[:, 0], tri_uv[:, 1], tri_uv[:, 2]
        area = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
        tris = tris[np.abs(area) > 1e-12]
    if len(tris):
        tri, pix, fz, fcol = _rasterize(proj.uv[tris], proj.depth[tris], cloud.colors[tris], W, H)
        if len(pix):
            order = np.lexsort([tri, fz, pix])
            pix_s = order[np.r_[True, np.diff(pix[order]) != 0]]
            p = pix[pix_s]
            rgb[p] = fcol[pix_s]
            zbuf[p] = fz[pix_s]
            mask[p] = True
    return MeshRenderResult(rgb.reshape(H, W, 3), mask.reshape(H, W), zbuf.reshape(H, W))
