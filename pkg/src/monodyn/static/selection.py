"""Choosing which source views feed the static renderer."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InsufficientFramesError, InvalidArgumentError

STRATEGIES = ("window", "cluster")


@dataclass(frozen=True)
class SourceSelectionConfig:
    n_spatial: int = 10
    strategy: str = "window"
    time_window: float = 12.0
    n_cluster: int = 40
    rng_seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise InvalidArgumentError(f"unknown selection strategy {self.strategy!r}")
        if self.n_spatial < 1:
            raise InvalidArgumentError("n_spatial must be positive")
        if self.strategy == "cluster" and self.n_cluster < self.n_spatial:
            raise InvalidArgumentError("n_cluster must be >= n_spatial")


def kmeans(points, k, seed=0, max_iter=100, tol=1e-6):
    """Lloyd's k-means with k-means++ seeding.

    Returns ``(centers (k, D), labels (N,))``. Empty clusters keep their
    previous center.
    """
    X = np.asarray(points, dtype=np.float64)
    n = len(X)
    if not 1 <= k <= n:
        raise InvalidArgumentError(f"cannot form {k} clusters from {n} points")
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(n))]
    d2 = np.sum((X - X[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            # every remaining point coincides with a center
            rest = np.setdiff1d(np.arange(n), chosen)
            nxt = int(rng.choice(rest))
        chosen.append(nxt)
        d2 = np.minimum(d2, np.sum((X - X[nxt]) ** 2, axis=1))
    centers = X[chosen].copy()

    labels = np.zeros(n, dtype=np.intp)
    for _ in range(max_iter):
        dist = np.sum((X[:, None, :] - centers[None]) ** 2, axis=2)
        labels = np.argmin(dist, axis=1)
        new = centers.copy()
        for c in range(k):
            members = labels == c
            if members.any():
                new[c] = X[members].mean(axis=0)
        shift = np.max(np.linalg.norm(new - centers, axis=1))
        centers = new
        if shift < tol:
            break
    labels = np.argmin(np.sum((X[:, None, :] - centers[None]) ** 2, axis=2), axis=1)
    return centers, labels


def _nearest(candidates, centers, target, count):
    dist = np.linalg.norm(centers[candidates] - target, axis=1)
    return [int(candidates[i]) for i in np.argsort(dist, kind="stable")[:count]]


def select_source_views(cameras, times, target_camera, t_tgt, cfg=SourceSelectionConfig()):
    """Indices of the source views used for static rendering.

    ``window``: frames with ``floor(t - w) <= t_i <= ceil(t + w)``, then the
    ``n_spatial`` with camera centers nearest the target.
    ``cluster``: k-means over all camera centers, the ``n_spatial`` clusters
    nearest the target, and from each the member closest in time to ``t_tgt``.
    """
    times = np.asarray(times, dtype=np.float64)
    centers = np.array([c.center for c in cameras])
    target = target_camera.center
    n = len(cameras)
    if cfg.strategy == "window":
        if n < cfg.n_spatial:
            raise InsufficientFramesError(f"window selection needs {cfg.n_spatial} frames, scene has {n}")
        lo = math.floor(t_tgt - cfg.time_window)
        hi = math.ceil(t_tgt + cfg.time_window)
        inside = np.nonzero((times >= lo) & (times <= hi))[0]
        return sorted(_nearest(inside, centers, target, cfg.n_spatial))

    if n < cfg.n_cluster:
        raise InsufficientFramesError(f"cluster selection needs {cfg.n_cluster} frames, scene has {n}")
    cluster_centers, labels = kmeans(centers, cfg.n_cluster, seed=cfg.rng_seed)
    populated = np.unique(labels)
    picked = []
    for c in _nearest(populated, cluster_centers, target, cfg.n_spatial):
        members = np.nonzero(labels == c)[0]
        picked.append(int(members[np.argmin(np.abs(times[members] - t_tgt))]))
    return sorted(picked)
