"""Static backend B: toy epipolar aggregator with masked view attention.

Ray samples are projected into the source views; a stack of alternating view
and ray attention blocks aggregates the sampled colors. Views whose sample
lands on dynamic content (or outside the view) get exactly zero attention.
When every view of a sample is excluded the sample falls back to plain,
unmasked attention.

All weights are frozen and drawn from a seeded generator; there is no training.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..errors import InvalidArgumentError
from ..geometry import in_domain, interpolate_bilinear, lift, project


@dataclass(frozen=True)
class AggregatorConfig:
    n_blocks: int = 2
    n_ray_samples: int = 64
    feature_dim: int = 16
    weight_seed: int = 0
    near_percentile: float = 1.0
    far_percentile: float = 99.0
    near_scale: float = 0.9
    far_scale: float = 1.1

    def __post_init__(self):
        if min(self.n_blocks, self.n_ray_samples, self.feature_dim) < 1:
            raise InvalidArgumentError("aggregator sizes must be positive")
        if self.feature_dim < 3:
            raise InvalidArgumentError("feature_dim must be at least 3")


class ViewAttention(NamedTuple):
    features: np.ndarray   # (..., d)
    weights: np.ndarray    # (..., V)
    fallback: np.ndarray   # (...,) every view was excluded
    used: np.ndarray       # (..., V) views that took part in the softmax


class RayRender(NamedTuple):
    rgb: np.ndarray          # (R, 3)
    all_masked: np.ndarray   # (R,) every sample of the ray fell back
    fallback: np.ndarray     # (R, S)
    sigma: np.ndarray        # (R, P)


def masked_softmax(logits, excluded=None):
    """Softmax over the last axis; excluded entries get weight exactly 0."""
    if excluded is not None:
        logits = np.where(excluded, -np.inf, logits)
    m = np.max(logits, axis=-1, keepdims=True)
    e = np.exp(logits - m)
    return e / np.sum(e, axis=-1, keepdims=True)


def _masked_std(values, include):
    """Population std over axis -2 restricted to ``include``, averaged over features.

    Values are measured relative to the first included entry so that exactly
    equal entries give exactly 0.
    """
    inc = include.astype(np.float64)[..., None]
    count = inc.sum(axis=-2)
    first = np.argmax(include, axis=-1)
    ref = np.take_along_axis(values, first[..., None, None], axis=-2)
    dev = (values - ref) * inc
    safe = np.maximum(count, 1.0)
    mean = dev.sum(axis=-2) / safe
    var = (((dev - mean[..., None, :]) * inc) ** 2).sum(axis=-2) / safe
    return np.sqrt(var).mean(axis=-1)


def depth_bounds(frames, cfg: AggregatorConfig = AggregatorConfig()):
    """Near/far sampling bounds from percentiles of the source depths."""
    d = np.concatenate([f.depth[np.isfinite(f.depth)].ravel() for f in frames])
    return (cfg.near_scale * float(np.percentile(d, cfg.near_percentile)),
            cfg.far_scale * float(np.percentile(d, cfg.far_percentile)))


def sample_ray(camera, pixels, near, far, n_samples):
    """``n_samples`` points with uniformly spaced camera depths in ``[near, far]``.

    ``pixels`` is ``(2,)`` or ``(R, 2)``; output is ``(n, 3)`` or ``(R, n, 3)``.
    """
    pixels = np.asarray(pixels, dtype=np.float64)
    z = np.linspace(near, far, n_samples)
    uv = np.broadcast_to(pixels[..., None, :], pixels.shape[:-1] + (n_samples, 2))
    return lift(camera, uv, z)


class EpipolarAggregator:
    def __init__(self, cfg: AggregatorConfig = AggregatorConfig()):
        self.cfg = cfg
        d = cfg.feature_dim
        rng = np.random.default_rng(cfg.weight_seed)
        embed = np.zeros((d, 3))
        embed[:3] = np.eye(3)
        embed[3:] = rng.normal(scale=1.0 / np.sqrt(3.0), size=(d - 3, 3))
        self.embed_weight = embed
        scale = 1.0 / np.sqrt(d)
        self.view_q, self.view_k, self.view_v = (rng.normal(scale=scale, size=(cfg.n_blocks, d, d)) for _ in range(3))
        self.ray_q, self.ray_k, self.ray_v = (rng.normal(scale=scale, size=(cfg.n_blocks, d, d)) for _ in range(3))
        self.rgb_weight = rng.normal(scale=scale, size=(3, d))
        self.rgb_bias = np.zeros(3)
        for arr in (self.embed_weight, self.view_q, self.view_k, self.view_v,
                    self.ray_q, self.ray_k, self.ray_v, self.rgb_weight, self.rgb_bias):
            arr.setflags(write=False)

    @property
    def dim(self):
        return self.cfg.feature_dim

    def embed(self, rgb):
        return np.asarray(rgb, dtype=np.float64) @ self.embed_weight.T

    def gather_features(self, positions, views):
        """Per-view embedded colors, dynamic flags and validity at ``positions``.

        Returns ``(features (..., V, d), xi (..., V) bool, valid (..., V) bool)``.
        """
        positions = np.asarray(positions, dtype=np.float64)
        feats, xis, valids = [], [], []
        for f in views:
            proj = project(f.camera, positions)
            valid = proj.in_front & in_domain(proj.uv, f.camera.width, f.camera.height)
            uv = np.where(proj.in_front[..., None], proj.uv, 0.0)
            feats.append(self.embed(interpolate_bilinear(f.image, uv)))
            xis.append(interpolate_bilinear(f.dynamic_mask.astype(np.float64), uv) > 0)
            valids.append(valid)
        return np.stack(feats, axis=-2), np.stack(xis, axis=-1), np.stack(valids, axis=-1)

    def view_step(self, block, query, keys, excluded=None, masking=True) -> ViewAttention:
        """One view-attention block.

        ``query`` is ``(..., d)``, ``keys`` the raw per-view features
        ``(..., V, d)``; ``excluded`` flags views to leave out of the softmax.
        """
        q = query @ self.view_q[block].T
        k = keys @ self.view_k[block].T
        v = keys @ self.view_v[block].T
        logits = np.einsum("...d,...vd->...v", q, k) / np.sqrt(self.dim)
        if excluded is None or not masking:
            excl = np.zeros(logits.shape, dtype=bool)
            fallback = np.zeros(logits.shape[:-1], dtype=bool)
        else:
            excluded = np.broadcast_to(excluded, logits.shape)
            fallback = excluded.all(axis=-1)
            excl = excluded & ~fallback[..., None]
        w = masked_softmax(logits, excl)
        out = np.einsum("...v,...vd->...d", w, v)
        return ViewAttention(out, w, fallback, ~excl)

    def ray_step(self, block, feats):
        """Self-attention along the ray.

        Returns the updated ``(..., S, d)`` features and the attention ``(..., S)``
        of a mean-feature aggregation query over the samples.
        """
        q = feats @ self.ray_q[block].T
        k = feats @ self.ray_k[block].T
        v = feats @ self.ray_v[block].T
        scale = np.sqrt(self.dim)
        attn = masked_softmax(np.einsum("...sd,...td->...st", q, k) / scale)
        updated = feats + np.einsum("...st,...td->...sd", attn, v)
        agg_q = feats.mean(axis=-2) @ self.ray_q[block].T
        a = masked_softmax(np.einsum("...d,...sd->...s", agg_q, k) / scale)
        return updated, a

    def key_std(self, block, keys, include):
        return _masked_std(keys @ self.view_k[block].T, include)

    def aggregate(self, raw, excluded, masking=True) -> RayRender:
        """Run all blocks on gathered features ``raw`` of shape ``(R, S, V, d)``."""
        R, S = raw.shape[:2]
        feats = raw.max(axis=-2)
        sigma = np.zeros((R, self.cfg.n_blocks))
        fallback = np.zeros((R, S), dtype=bool)
        for p in range(self.cfg.n_blocks):
            va = self.view_step(p, feats, raw, excluded, masking)
            fallback |= va.fallback
            feats, a = self.ray_step(p, va.features)
            sigma[:, p] = np.sum(a * self.key_std(p, raw, va.used), axis=-1)
        rgb = 1.0 / (1.0 + np.exp(-(feats.mean(axis=-2) @ self.rgb_weight.T + self.rgb_bias)))
        return RayRender(rgb, fallback.all(axis=-1), fallback, sigma)

    def render_rays(self, camera, pixels, views, near, far, masking=True) -> RayRender:
        positions = sample_ray(camera, pixels, near, far, self.cfg.n_ray_samples)
        raw, xi, valid = self.gather_features(positions, views)
        # out-of-frame views are always dropped; ``masking`` only toggles the dynamic bits
        return self.aggregate(raw, (xi | ~valid) if masking else ~valid)

    def render_ray(self, camera, pixel, views, near, far, masking=True) -> RayRender:
        return self.render_rays(camera, np.asarray(pixel, dtype=np.float64)[None], views, near, far, masking)

    def render_image(self, camera, views, near=None, far=None, masking=True, chunk=512):
        """Render every pixel of ``camera``.

        Returns ``(rgb (H, W, 3), coverage (H, W), sigma (H, W, P))``; a pixel
        is uncovered when all of its samples had every view excluded.
        """
        if near is None or far is None:
            near, far = depth_bounds(views, self.cfg)
        H, W = camera.height, camera.width
        ys, xs = np.mgrid[0:H, 0:W]
        pix = np.stack([xs.ravel(), ys.ravel()], axis=-1).astype(np.float64)
        rgb = np.zeros((H * W, 3))
        cover = np.zeros(H * W, dtype=bool)
        sigma = np.zeros((H * W, self.cfg.n_blocks))
        for s in range(0, H * W, chunk):
            r = self.render_rays(camera, pix[s:s + chunk], views, near, far, masking)
            rgb[s:s + chunk] = r.rgb
            cover[s:s + chunk] = ~r.all_masked
            sigma[s:s + chunk] = r.sigma
        return rgb.reshape(H, W, 3), cover.reshape(H, W), sigma.reshape(H, W, -1)
