"""Pinhole camera model, lifting/projection and raster sampling.

Conventions used everywhere in the package:

* ``extrinsics`` maps world to camera: ``x_cam = R @ X + t``.
* depth is the camera-frame z coordinate, not the length of the ray.
* the center of the pixel at column ``c``, row ``r`` is the continuous
  coordinate ``(c, r)``; rasters are sampled on ``[0, W-1] x [0, H-1]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InvalidArgumentError

_ORTHO_TOL = 1e-6


def _frozen(a, shape):
    arr = np.array(a, dtype=np.float64)
    if arr.shape != shape:
        raise InvalidArgumentError(f"expected shape {shape}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class CameraModel:
    """Intrinsics/extrinsics pair of a pinhole camera.

    Attributes:
        intrinsics: 3x3 upper-triangular matrix in pixels.
        extrinsics: 4x4 rigid world-to-camera transform.
        width: image width in pixels.
        height: image height in pixels.
    """

    intrinsics: np.ndarray
    extrinsics: np.ndarray
    width: int
    height: int

    def __post_init__(self):
        K = _frozen(self.intrinsics, (3, 3))
        E = _frozen(self.extrinsics, (4, 4))
        object.__setattr__(self, "intrinsics", K)
        object.__setattr__(self, "extrinsics", E)
        if not (np.all(np.isfinite(K)) and np.all(np.isfinite(E))):
            raise InvalidArgumentError("camera matrices must be finite")
        if not np.array_equal(K[2], [0.0, 0.0, 1.0]) or K[1, 0] != 0 or K[2, 0] != 0 or K[2, 1] != 0:
            raise InvalidArgumentError("intrinsics must be upper triangular with last row (0, 0, 1)")
        if K[0, 0] <= 0 or K[1, 1] <= 0:
            raise InvalidArgumentError("focal lengths must be positive")
        if not np.array_equal(E[3], [0.0, 0.0, 0.0, 1.0]):
            raise InvalidArgumentError("extrinsics last row must be (0, 0, 0, 1)")
        R = E[:3, :3]
        if np.max(np.abs(R @ R.T - np.eye(3))) > _ORTHO_TOL or abs(np.linalg.det(R) - 1.0) > _ORTHO_TOL:
            raise InvalidArgumentError("extrinsics rotation block is not a proper rotation")
        w, h = int(self.width), int(self.height)
        if w != self.width or h != self.height or w <= 0 or h <= 0:
            raise InvalidArgumentError("width and height must be positive integers")
        object.__setattr__(self, "width", w)
        object.__setattr__(self, "height", h)

    @classmethod
    def from_params(cls, fx, fy, cx, cy, width, height, rotation=None, translation=None):
        K = np.array([[fx, 0.0, cx], [0.0, fy, cy], [0.0, 0.0, 1.0]])
        E = np.eye(4)
        if rotation is not None:
            E[:3, :3] = rotation
        if translation is not None:
            E[:3, 3] = translation
        return cls(K, E, width, height)

    @classmethod
    def looking_from(cls, K, center, width, height, rotation=None):
        """Camera placed at world position ``center`` with world-to-camera ``rotation``."""
        R = np.eye(3) if rotation is None else np.asarray(rotation, dtype=np.float64)
        E = np.eye(4)
        E[:3, :3] = R
        E[:3, 3] = -R @ np.asarray(center, dtype=np.float64)
        return cls(K, E, width, height)

    @property
    def rotation(self):
        return self.extrinsics[:3, :3]

    @property
    def translation(self):
        return self.extrinsics[:3, 3]

    @property
    def center(self):
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation

    @property
    def shape(self):
        return (self.height, self.width)

    def to_record(self):
        return {
            "K": [float(v) for v in self.intrinsics.ravel()],
            "E": [float(v) for v in self.extrinsics.ravel()],
            "width": self.width,
            "height": self.height,
        }

    @classmethod
    def from_record(cls, rec):
        return cls(
            np.asarray(rec["K"], dtype=np.float64).reshape(3, 3),
            np.asarray(rec["E"], dtype=np.float64).reshape(4, 4),
            rec["width"],
            rec["height"],
        )


class Projection(NamedTuple):
    uv: np.ndarray
    depth: np.ndarray

    @property
    def in_front(self):
        return self.depth > 0

    @property
    def behind(self):
        return ~(self.depth > 0)


def lift(camera: CameraModel, uv, depth) -> np.ndarray:
    """Back-project pixel coordinates with camera-z depth to world points.

    ``uv`` has shape ``(..., 2)`` and ``depth`` broadcasts against ``uv[..., 0]``.
    Returns world points of shape ``(..., 3)``.
    """
    uv = np.asarray(uv, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    if uv.shape[-1:] != (2,):
        raise InvalidArgumentError(f"pixel coordinates need a trailing axis of 2, got {uv.shape}")
    if not (np.all(np.isfinite(uv)) and np.all(np.isfinite(depth))):
        raise InvalidArgumentError("lift() got non-finite pixel coordinates or depth")
    K = camera.intrinsics
    fx, s, cx = K[0]
    fy, cy = K[1, 1], K[1, 2]
    y = (uv[..., 1] - cy) / fy
    x = (uv[..., 0] - cx - s * y) / fx
    x_cam = np.stack(np.broadcast_arrays(x * depth, y * depth, depth * np.ones_like(x)), axis=-1)
    return (x_cam - camera.translation) @ camera.rotation


def project(camera: CameraModel, points) -> Projection:
    """Perspective projection of world points ``(..., 3)``.

    Points with non-positive depth are reported through ``Projection.behind``;
    their pixel coordinates are meaningless and set to NaN.
    """
    X = np.asarray(points, dtype=np.float64)
    if X.shape[-1:] != (3,):
        raise InvalidArgumentError(f"points need a trailing axis of 3, got {X.shape}")
    x_cam = X @ camera.rotation.T + camera.translation
    z = x_cam[..., 2]
    h = x_cam @ camera.intrinsics.T
    with np.errstate(divide="ignore", invalid="ignore"):
        uv = h[..., :2] / z[..., None]
    uv = np.where((z > 0)[..., None], uv, np.nan)
    return Projection(uv, z)


def in_domain(uv, width, height):
    """Mask of coordinates inside the interpolation domain ``[0, W-1] x [0, H-1]``."""
    uv = np.asarray(uv)
    x, y = uv[..., 0], uv[..., 1]
    return (x >= 0) & (x <= width - 1) & (y >= 0) & (y <= height - 1)


def interpolate_bilinear(raster, uv) -> np.ndarray:
    """Sample ``raster`` (H x W or H x W x C) at continuous coordinates.

    Coordinates outside the domain are clamped to the border. Output shape is
    ``uv.shape[:-1]`` for 2D rasters and ``uv.shape[:-1] + (C,)`` otherwise.
    """
    raster = np.asarray(raster)
    if raster.ndim not in (2, 3) or raster.shape[0] == 0 or raster.shape[1] == 0:
        raise InvalidArgumentError(f"cannot sample an empty or malformed raster of shape {raster.shape}")
    uv = np.asarray(uv, dtype=np.float64)
    if not np.all(np.isfinite(uv)):
        raise InvalidArgumentError("interpolate_bilinear() got non-finite coordinates")
    H, W = raster.shape[:2]
    x = np.clip(uv[..., 0], 0.0, W - 1)
    y = np.clip(uv[..., 1], 0.0, H - 1)
    x0 = np.floor(x).astype(np.intp)
    y0 = np.floor(y).astype(np.intp)
    x1 = np.minimum(x0 + 1, W - 1)
    y1 = np.minimum(y0 + 1, H - 1)
    fx = x - x0
    fy = y - y0
    if raster.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    r = raster.astype(np.float64, copy=False)
    top = r[y0, x0] * (1.0 - fx) + r[y0, x1] * fx
    bottom = r[y1, x0] * (1.0 - fx) + r[y1, x1] * fx
    return top * (1.0 - fy) + bottom * fy


def pixel_grid(height, width) -> np.ndarray:
    """``(H, W, 2)`` array of pixel-center coordinates ``(x, y)``."""
    ys, xs = np.mgrid[0:height, 0:width]
    return np.stack([xs, ys], axis=-1).astype(np.float64)
