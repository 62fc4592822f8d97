"""Analytic test scene: a textured square translating in front of a textured plane.

Everything is computed by ray casting against the two planes, so depths,
flows, masks and novel-view ground truth are exact up to float rounding.
Textures are seeded value noise defined on each surface's own coordinates,
which lets ground truth be rendered at any pose and time.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError
from .geometry import CameraModel, pixel_grid, project
from .scene_io import (
    FlowField,
    FrameBundle,
    Scene,
    TrackSet,
    save_scene,
    write_mask,
    write_raster,
    write_rgb,
)

logger = logging.getLogger(__name__)

_LATTICE = 64


@dataclass(frozen=True)
class SyntheticConfig:
    width: int = 256
    height: int = 256
    n_frames: int = 8
    focal: float = 256.0
    frame_time: float = 1.0
    z_bg: float = 8.0
    z_fg: float = 4.0
    square_size: float = 1.5
    square_center: tuple = (-0.4375, 0.0)   # at t = 0
    velocity: tuple = (0.125, 0.0)          # world units per frame
    baseline: float = 0.0625                # lateral camera step per frame
    bg_cell: float = 0.25
    fg_cell: float = 0.125
    bg_seed: int = 1
    fg_seed: int = 2
    # held-out targets as (camera_x, camera_y, time)
    holdout: tuple = ((0.03125, 0.05, 3.5), (-0.09375, -0.04, 2.25), (0.0, 0.0, 3.5))
    tracks_per_side: int = 6
    segment_tile: int = 32

    def __post_init__(self):
        if not self.z_fg < self.z_bg:
            raise InvalidArgumentError("foreground square must be in front of the background (z_fg < z_bg)")
        if self.n_frames < 2:
            raise InvalidArgumentError("need at least two frames")

    @property
    def intrinsics(self):
        return np.array([[self.focal, 0.0, (self.width - 1) / 2.0],
                         [0.0, self.focal, (self.height - 1) / 2.0],
                         [0.0, 0.0, 1.0]])

    def camera_at(self, x, y=0.0):
        return CameraModel.looking_from(self.intrinsics, [x, y, 0.0], self.width, self.height)

    def frame_camera(self, i):
        return self.camera_at((i - (self.n_frames - 1) / 2.0) * self.baseline)

    def frame_time_of(self, i):
        return i * self.frame_time

    def square_center_at(self, t):
        steps = t / self.frame_time
        return np.array(self.square_center) + steps * np.array(self.velocity)

    def holdout_targets(self):
        return [(self.camera_at(x, y), t) for x, y, t in self.holdout]


def value_noise(points, cell, seed):
    """Smooth RGB value noise in [0, 1] at 2D ``points`` (``(N, 2)``)."""
    lattice = np.random.default_rng(seed).random((_LATTICE, _LATTICE, 3))
    s = np.asarray(points, dtype=np.float64) / cell
    i0 = np.floor(s)
    f = s - i0
    f = f * f * f * (f * (f * 6 - 15) + 10)
    ix = i0[:, 0].astype(np.int64) % _LATTICE
    iy = i0[:, 1].astype(np.int64) % _LATTICE
    jx = (ix + 1) % _LATTICE
    jy = (iy + 1) % _LATTICE
    fx, fy = f[:, :1], f[:, 1:]
    top = lattice[iy, ix] * (1 - fx) + lattice[iy, jx] * fx
    bottom = lattice[jy, ix] * (1 - fx) + lattice[jy, jx] * fx
    return top * (1 - fy) + bottom * fy


@dataclass
class RayHits:
    depth: np.ndarray    # camera z
    points: np.ndarray   # world hit points
    is_fg: np.ndarray
    color: np.ndarray


def _intersect_plane(camera, uv, z_plane):
    K_inv = np.linalg.inv(camera.intrinsics)
    rays = np.concatenate([uv, np.ones(uv.shape[:-1] + (1,))], axis=-1) @ K_inv.T
    dirs = rays @ camera.rotation          # world direction per unit camera depth
    origin = camera.center
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = (z_plane - origin[2]) / dirs[..., 2]
    return lam, origin + lam[..., None] * dirs


def cast(cfg: SyntheticConfig, camera, uv, t) -> RayHits:
    """Intersect pixel rays with the scene at time ``t``."""
    uv = np.asarray(uv, dtype=np.float64).reshape(-1, 2)
    lam_bg, p_bg = _intersect_plane(camera, uv, cfg.z_bg)
    lam_fg, p_fg = _intersect_plane(camera, uv, cfg.z_fg)
    local = p_fg[:, :2] - cfg.square_center_at(t)
    half = cfg.square_size / 2.0
    fg = (lam_fg > 0) & np.all(np.abs(local) <= half, axis=1)
    depth = np.where(fg, lam_fg, lam_bg)
    points = np.where(fg[:, None], p_fg, p_bg)
    color = value_noise(p_bg[:, :2], cfg.bg_cell, cfg.bg_seed)
    if fg.any():
        color[fg] = value_noise(local[fg], cfg.fg_cell, cfg.fg_seed)
    return RayHits(depth, points, fg, color)


def render_ground_truth(cfg: SyntheticConfig, camera, t):
    """Exact ``(rgb, dynamic_mask, depth)`` for any camera and time."""
    H, W = camera.height, camera.width
    hits = cast(cfg, camera, pixel_grid(H, W).reshape(-1, 2), t)
    return hits.color.reshape(H, W, 3), hits.is_fg.reshape(H, W), hits.depth.reshape(H, W)


def exact_flow(cfg: SyntheticConfig, i, j):
    """Flow from frame i to frame j obtained by moving every hit point to time t_j."""
    cam_i, cam_j = cfg.frame_camera(i), cfg.frame_camera(j)
    ti, tj = cfg.frame_time_of(i), cfg.frame_time_of(j)
    uv = pixel_grid(cfg.height, cfg.width).reshape(-1, 2)
    hits = cast(cfg, cam_i, uv, ti)
    moved = hits.points.copy()
    shift = cfg.square_center_at(tj) - cfg.square_center_at(ti)
    moved[hits.is_fg, :2] += shift
    uv_j = project(cam_j, moved).uv
    return (uv_j - uv).reshape(cfg.height, cfg.width, 2)


def _quantize(rgb):
    # what the frame looks like after the 8-bit PNG round trip
    return (np.rint(np.clip(rgb, 0, 1) * 255.0) / 255.0).astype(np.float32)


def synthetic_tracks(cfg: SyntheticConfig):
    """Tracks of a lattice of points on the square, visible while inside the image."""
    n = cfg.tracks_per_side
    half = cfg.square_size / 2.0
    offs = np.linspace(-0.8 * half, 0.8 * half, n)
    local = np.stack(np.meshgrid(offs, offs), axis=-1).reshape(-1, 2)
    rows = []
    for i in range(cfg.n_frames):
        t = cfg.frame_time_of(i)
        world = np.concatenate([local + cfg.square_center_at(t), np.full((len(local), 1), cfg.z_fg)], axis=1)
        uv = project(cfg.frame_camera(i), world).uv
        inside = (uv[:, 0] >= 0) & (uv[:, 0] <= cfg.width - 1) & (uv[:, 1] >= 0) & (uv[:, 1] <= cfg.height - 1)
        for tid, (p, vis) in enumerate(zip(uv, inside)):
            rows.append((tid, i, float(p[0]), float(p[1]), int(vis)))
    return TrackSet.from_rows(rows)


def synthetic_segments(cfg: SyntheticConfig, mask):
    """Square footprint as label 1, background split into square tiles."""
    H, W = mask.shape
    ys, xs = np.mgrid[0:H, 0:W]
    tiles_x = -(-W // cfg.segment_tile)
    labels = 2 + (ys // cfg.segment_tile) * tiles_x + xs // cfg.segment_tile
    return np.where(mask, 1, labels).astype(np.int64)


def build_scene(cfg: SyntheticConfig, with_tracks=True, with_segments=True) -> Scene:
    frames = []
    for i in range(cfg.n_frames):
        cam = cfg.frame_camera(i)
        rgb, mask, depth = render_ground_truth(cfg, cam, cfg.frame_time_of(i))
        frames.append(FrameBundle(_quantize(rgb), depth.astype(np.float32), mask, cam, cfg.frame_time_of(i)))
    flows = {}
    for i in range(cfg.n_frames - 1):
        flows[(i, i + 1)] = FlowField(i, i + 1, exact_flow(cfg, i, i + 1).astype(np.float32))
        flows[(i + 1, i)] = FlowField(i + 1, i, exact_flow(cfg, i + 1, i).astype(np.float32))
    tracks = synthetic_tracks(cfg) if with_tracks else None
    segments = [synthetic_segments(cfg, f.dynamic_mask) for f in frames] if with_segments else None
    return Scene(frames, flows, tracks, segments).validate()


def write_targets(path, targets):
    records = []
    for cam, t in targets:
        rec = {"time": float(t)}
        rec.update(cam.to_record())
        records.append(rec)
    Path(path).write_text(json.dumps(records, indent=1))


def gen_synthetic(cfg: SyntheticConfig, out_dir, with_tracks=True, with_segments=True) -> Scene:
    """Write a complete bundle plus ``gt/`` ground truth for the held-out targets."""
    out = Path(out_dir)
    scene = build_scene(cfg, with_tracks, with_segments)
    save_scene(scene, out)
    gt = out / "gt"
    for sub in ("rgb", "mask", "depth"):
        (gt / sub).mkdir(parents=True, exist_ok=True)
    targets = cfg.holdout_targets()
    write_targets(gt / "targets.json", targets)
    for k, (cam, t) in enumerate(targets):
        rgb, mask, depth = render_ground_truth(cfg, cam, t)
        write_rgb(gt / "rgb" / f"{k:05d}.png", rgb)
        write_mask(gt / "mask" / f"{k:05d}.png", mask)
        write_raster(gt / "depth" / f"{k:05d}.pgdv", "depth", depth)
    (out / "synthetic.json").write_text(json.dumps(asdict(cfg), indent=1))
    logger.info("wrote synthetic scene with %d frames to %s", cfg.n_frames, out)
    return scene


def config_from_dict(d):
    d = dict(d)
    for key in ("square_center", "velocity"):
        if key in d:
            d[key] = tuple(d[key])
    if "holdout" in d:
        d["holdout"] = tuple(tuple(h) for h in d["holdout"])
    return SyntheticConfig(**d)
