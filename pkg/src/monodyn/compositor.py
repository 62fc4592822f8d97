"""Blending of the static and dynamic branches, plus image metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate1d

from .errors import InvalidArgumentError

PSNR_CAP = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass(eq=False)
class RenderOutput:
    rgb: np.ndarray
    dyn_mask: np.ndarray
    hole_mask: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def blend(static_rgb, static_coverage, dynamic_rgb, dynamic_mask, background=(0.0, 0.0, 0.0)) -> RenderOutput:
    """Per-pixel selection between the dynamic and static renders.

    Dynamic pixels take the dynamic color, other covered pixels the static
    color, and pixels covered by neither the background (flagged as holes).
    """
    dyn = np.asarray(dynamic_mask, dtype=bool)
    cov = np.asarray(static_coverage, dtype=bool)
    static_rgb = np.asarray(static_rgb)
    dynamic_rgb = np.asarray(dynamic_rgb)
    if not (static_rgb.shape == dynamic_rgb.shape and dyn.shape == cov.shape == static_rgb.shape[:2]):
        raise InvalidArgumentError("static and dynamic renders differ in shape")
    bg = np.broadcast_to(np.asarray(background, dtype=static_rgb.dtype), static_rgb.shape)
    rgb = np.where(dyn[..., None], dynamic_rgb, np.where(cov[..., None], static_rgb, bg))
    return RenderOutput(rgb, dyn, ~dyn & ~cov)


def _select(mask, coverage, shape):
    sel = np.ones(shape, dtype=bool)
    if mask is not None:
        sel &= np.asarray(mask, dtype=bool)
    if coverage is not None:
        sel &= np.asarray(coverage, dtype=bool)
    return sel


def psnr(a, b, mask=None, coverage=None):
    """PSNR in dB for images in [0, 1] over ``mask & coverage`` pixels.

    Zero error reports ``PSNR_CAP``; an empty selection reports NaN.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidArgumentError(f"image shapes differ: {a.shape} vs {b.shape}")
    sel = _select(mask, coverage, a.shape[:2])
    if not sel.any():
        return math.nan
    mse = float(np.mean((a[sel] - b[sel]) ** 2))
    if mse == 0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(1.0 / mse))


def _gaussian_window():
    x = np.arange(SSIM_WINDOW) - (SSIM_WINDOW - 1) / 2
    g = np.exp(-(x ** 2) / (2 * SSIM_SIGMA ** 2))
    return g / g.sum()


def _filter(img, g):
    return correlate1d(correlate1d(img, g, axis=0, mode="reflect"), g, axis=1, mode="reflect")


def ssim_map(a, b):
    """Per-pixel SSIM (11x11 Gaussian window, sigma 1.5), averaged over channels."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidArgumentError(f"image shapes differ: {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a, b = a[..., None], b[..., None]
    c1 = SSIM_K1 ** 2
    c2 = SSIM_K2 ** 2
    g = _gaussian_window()
    maps = []
    for ch in range(a.shape[2]):
        x, y = a[..., ch], b[..., ch]
        mx, my = _filter(x, g), _filter(y, g)
        vx = _filter(x * x, g) - mx * mx
        vy = _filter(y * y, g) - my * my
        cxy = _filter(x * y, g) - mx * my
        maps.append(((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2)))
    return np.mean(maps, axis=0)


def ssim(a, b, mask=None, coverage=None):
    """Mean SSIM; with a mask, the SSIM map is averaged over the selected pixels."""
    m = ssim_map(a, b)
    sel = _select(mask, coverage, m.shape)
    if not sel.any():
        return math.nan
    return float(np.mean(m[sel]))
