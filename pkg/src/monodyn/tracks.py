"""Complementary dynamic points from 2D point tracks.

Visible track samples on dynamic content are lifted with the frame's depth;
the position at the target time is linearly inter/extrapolated from the two
samples closest in time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamic.cloud import TargetCloud, merge_clouds
from .errors import SceneValidationError
from .geometry import interpolate_bilinear, lift

DEFAULT_N_TEMPORAL = 6


@dataclass(eq=False)
class Trajectory3D:
    track_id: int
    times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    points: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    frames: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    pixels: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    def __len__(self):
        return len(self.times)


def lift_tracks(tracks, scene, frame_subset=None):
    """Lift the visible, dynamic samples of every track.

    Args:
        tracks: a :class:`~monodyn.scene_io.TrackSet`.
        scene: the loaded scene providing depth, masks and cameras.
        frame_subset: optional iterable of frame indices to keep.

    Returns:
        list of non-empty :class:`Trajectory3D`, ordered by track id.
    """
    allowed = None if frame_subset is None else set(int(i) for i in frame_subset)
    out = []
    for tid, samples in tracks.trajectories.items():
        times, pts, frames, pixels = [], [], [], []
        for s in samples:
            if not 0 <= s.frame_index < len(scene):
                raise SceneValidationError(f"track {tid} references missing frame {s.frame_index}",
                                           frame=s.frame_index)
            if not s.visible or (allowed is not None and s.frame_index not in allowed):
                continue
            f = scene.frames[s.frame_index]
            uv = np.array([s.x, s.y])
            if interpolate_bilinear(f.dynamic_mask.astype(np.float64), uv) <= 0:
                continue
            d = interpolate_bilinear(f.depth, uv)
            if not (np.isfinite(d) and d > 0):
                continue
            times.append(f.time)
            pts.append(lift(f.camera, uv, d))
            frames.append(s.frame_index)
            pixels.append(uv)
        if times:
            order = np.argsort(times, kind="stable")
            out.append(Trajectory3D(tid, np.asarray(times)[order], np.asarray(pts)[order],
                                    np.asarray(frames, dtype=np.int64)[order], np.asarray(pixels)[order]))
    return out


def _closest(traj, t_tgt, count):
    # stable sort on |dt| keeps earlier samples first on ties
    return np.argsort(np.abs(traj.times - t_tgt), kind="stable")[:count]


def track_position_at(traj: Trajectory3D, t_tgt):
    """Linear-motion estimate of the track position at ``t_tgt`` (None if empty)."""
    if len(traj) == 0:
        return None
    if len(traj) == 1:
        return traj.points[0].copy()
    i, j = sorted(_closest(traj, t_tgt, 2))
    ta, tb = traj.times[i], traj.times[j]
    xa, xb = traj.points[i], traj.points[j]
    return xa + (t_tgt - ta) / (tb - ta) * (xb - xa)


def build_track_cloud(trajectories, scene, t_tgt) -> TargetCloud:
    """One point per trajectory, colored from its temporally nearest visible sample."""
    positions, colors, pixels = [], [], []
    for traj in trajectories:
        x = track_position_at(traj, t_tgt)
        if x is None:
            continue
        k = _closest(traj, t_tgt, 1)[0]
        frame = scene.frames[int(traj.frames[k])]
        positions.append(x)
        colors.append(interpolate_bilinear(frame.image, traj.pixels[k]))
        pixels.append(traj.pixels[k])
    if not positions:
        return TargetCloud.empty()
    return TargetCloud.from_points(np.asarray(positions), np.asarray(colors), u1=np.asarray(pixels))


def temporal_window(times, t_tgt, n_temporal=DEFAULT_N_TEMPORAL):
    """Indices of the ``n_temporal`` frames closest in time to ``t_tgt`` (sorted)."""
    times = np.asarray(times, dtype=np.float64)
    idx = np.argsort(np.abs(times - t_tgt), kind="stable")[:n_temporal]
    return np.sort(idx)


__all__ = [
    "Trajectory3D",
    "lift_tracks",
    "track_position_at",
    "build_track_cloud",
    "merge_clouds",
    "temporal_window",
]
