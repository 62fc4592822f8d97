"""Flow-paired point clouds of dynamic content and their interpolation in time."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgumentError, TimeRangeError
from ..geometry import in_domain, interpolate_bilinear, lift

DEFAULT_ABS_TOL = 1.0
DEFAULT_REL_TOL = 0.05


@dataclass(eq=False)
class PairedPointCloud:
    """Matched 3D points lifted from the frames bracketing the target time.

    ``grid_index`` rows are ``(frame, row, col)`` of the originating pixel of
    ``u1`` on frame ``i_minus``.
    """

    x1: np.ndarray
    x2: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    grid_index: np.ndarray
    i_minus: int
    i_plus: int

    def __len__(self):
        return len(self.x1)


@dataclass(eq=False)
class TargetCloud:
    """Points at the target time. ``grid_index`` is -1 for points without lattice topology."""

    positions: np.ndarray
    colors: np.ndarray
    grid_index: np.ndarray
    u1: np.ndarray
    u2: np.ndarray

    def __post_init__(self):
        n = len(self.positions)
        if not all(len(a) == n for a in (self.colors, self.grid_index, self.u1, self.u2)):
            raise InvalidArgumentError("target cloud arrays differ in length")
        if not np.all(np.isfinite(self.positions)):
            raise InvalidArgumentError("target cloud positions must be finite")

    def __len__(self):
        return len(self.positions)

    @classmethod
    def empty(cls):
        return cls(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64),
                   np.zeros((0, 2)), np.zeros((0, 2)))

    @classmethod
    def from_points(cls, positions, colors, u1=None, u2=None):
        positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
        n = len(positions)
        u1 = np.full((n, 2), np.nan) if u1 is None else np.asarray(u1, dtype=np.float64)
        u2 = u1 if u2 is None else np.asarray(u2, dtype=np.float64)
        return cls(positions, np.asarray(colors, dtype=np.float64).reshape(-1, 3),
                   np.full((n, 3), -1, dtype=np.int64), u1, u2)

    def subset(self, index):
        return TargetCloud(self.positions[index], self.colors[index], self.grid_index[index],
                           self.u1[index], self.u2[index])

    @property
    def has_topology(self):
        return self.grid_index[:, 0] >= 0


def select_temporal_neighbors(times, t_tgt):
    """Indices of the last frame at or before and the first frame at or after ``t_tgt``."""
    times = np.asarray(times, dtype=np.float64)
    if len(times) == 0 or not (times[0] <= t_tgt <= times[-1]):
        lo, hi = (times[0], times[-1]) if len(times) else (np.nan, np.nan)
        raise TimeRangeError(f"target time {t_tgt} outside [{lo}, {hi}]")
    i_minus = int(np.searchsorted(times, t_tgt, side="right")) - 1
    i_plus = int(np.searchsorted(times, t_tgt, side="left"))
    return i_minus, i_plus


def check_cycle(flow_fwd, flow_bwd, uv, abs_tol=DEFAULT_ABS_TOL, rel_tol=DEFAULT_REL_TOL):
    """Forward-backward consistency of flow at coordinates ``uv`` (``(..., 2)``).

    A coordinate passes iff ``|f(u) + b(u + f(u))| <= max(abs_tol, rel_tol * |f(u)|)``.
    """
    uv = np.asarray(uv, dtype=np.float64)
    fwd = interpolate_bilinear(flow_fwd, uv)
    bwd = interpolate_bilinear(flow_bwd, uv + fwd)
    err = np.linalg.norm(fwd + bwd, axis=-1)
    return err <= np.maximum(abs_tol, rel_tol * np.linalg.norm(fwd, axis=-1))


def build_paired_cloud(frame_minus, frame_plus, flow_fwd=None, flow_bwd=None,
                       abs_tol=DEFAULT_ABS_TOL, rel_tol=DEFAULT_REL_TOL,
                       i_minus=0, i_plus=None) -> PairedPointCloud:
    """Lift flow-matched dynamic pixels of two frames to paired 3D points.

    Pixels of ``frame_minus`` with a positive dynamic mask are followed along
    ``flow_fwd``; a pair is kept when the landing point is inside frame_plus,
    on its dynamic content and passes the cycle check against ``flow_bwd``.
    Passing the same frame twice (and no flows) yields identical clouds.
    """
    same = frame_plus is frame_minus
    if i_plus is None:
        i_plus = i_minus if same else i_minus + 1
    if not same and (flow_fwd is None or flow_bwd is None):
        raise InvalidArgumentError("distinct frames need a forward and backward flow")

    rows, cols = np.nonzero(frame_minus.dynamic_mask)
    u1 = np.stack([cols, rows], axis=-1).astype(np.float64)
    d1 = frame_minus.depth[rows, cols].astype(np.float64)
    keep = np.isfinite(d1) & (d1 > 0)

    if same:
        u2 = u1
        d2 = d1
    else:
        fwd = np.asarray(flow_fwd, dtype=np.float64)[rows, cols]
        u2 = u1 + fwd
        H2, W2 = frame_plus.depth.shape
        keep &= in_domain(u2, W2, H2)
        # clamped samples outside the domain are discarded by keep
        keep &= interpolate_bilinear(frame_plus.dynamic_mask.astype(np.float64), u2) > 0
        keep &= check_cycle(flow_fwd, flow_bwd, u1, abs_tol, rel_tol)
        d2 = interpolate_bilinear(frame_plus.depth, u2)
        keep &= np.isfinite(d2) & (d2 > 0)

    rows, cols, u1, u2, d1, d2 = rows[keep], cols[keep], u1[keep], u2[keep], d1[keep], d2[keep]
    x1 = lift(frame_minus.camera, u1, d1)
    c1 = frame_minus.image[rows, cols].astype(np.float64)
    if same:
        x2, c2 = x1.copy(), c1.copy()
    else:
        x2 = lift(frame_plus.camera, u2, d2)
        c2 = interpolate_bilinear(frame_plus.image, u2)
    grid = np.stack([np.full_like(rows, i_minus), rows, cols], axis=-1).astype(np.int64)
    return PairedPointCloud(x1, x2, c1, c2, u1, u2.copy(), grid, i_minus, i_plus)


def interpolate_cloud(paired: PairedPointCloud, t_minus, t_plus, t_tgt) -> TargetCloud:
    """Linear-motion positions (and blended colors) at ``t_tgt``."""
    if not t_minus <= t_tgt <= t_plus:
        raise TimeRangeError(f"target time {t_tgt} outside bracket [{t_minus}, {t_plus}]")
    if t_minus == t_plus:
        pos, col = paired.x1.copy(), paired.c1.copy()
    else:
        span = t_plus - t_minus
        a = (t_tgt - t_minus) / span
        b = (t_plus - t_tgt) / span
        pos = a * paired.x2 + b * paired.x1
        col = a * paired.c2 + b * paired.c1
    return TargetCloud(pos, col, paired.grid_index.copy(), paired.u1.copy(), paired.u2.copy())


def merge_clouds(a: TargetCloud, b: TargetCloud) -> TargetCloud:
    return TargetCloud(
        np.concatenate([a.positions, b.positions]),
        np.concatenate([a.colors, b.colors]),
        np.concatenate([a.grid_index, b.grid_index]),
        np.concatenate([a.u1, b.u1]),
        np.concatenate([a.u2, b.u2]),
    )
