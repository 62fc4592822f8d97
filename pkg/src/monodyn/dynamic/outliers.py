"""Statistical outlier removal on the target-time cloud."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ..errors import InvalidArgumentError


@dataclass(frozen=True)
class OutlierConfig:
    n_neighbors: int = 50
    deviation: float = 0.1

    def __post_init__(self):
        if self.n_neighbors < 1:
            raise InvalidArgumentError("n_neighbors must be at least 1")
        if self.deviation < 0:
            raise InvalidArgumentError("deviation must be non-negative")


def mean_neighbor_distance(points, n_neighbors):
    """Mean Euclidean distance of every point to its ``k`` nearest other points.

    ``k`` is ``min(n_neighbors, len(points) - 1)``.
    """
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    k = min(n_neighbors, n - 1)
    if k < 1:
        return np.zeros(n)
    # the query returns the point itself at distance 0 (or a duplicate of it,
    # which has the same distance), so drop one column
    dist, _ = cKDTree(points).query(points, k=k + 1)
    return dist[:, 1:].mean(axis=1)


def outlier_mask(points, n_neighbors=50, deviation=0.1):
    """Boolean mask of outliers: mean kNN distance above ``median + deviation * std``."""
    mean_d = mean_neighbor_distance(points, n_neighbors)
    if len(mean_d) == 0:
        return np.zeros(0, dtype=bool)
    threshold = np.median(mean_d) + deviation * np.std(mean_d)
    return mean_d > threshold


def remove_outliers(cloud, cfg: OutlierConfig = OutlierConfig()):
    if len(cloud) == 0:
        return cloud
    return cloud.subset(~outlier_mask(cloud.positions, cfg.n_neighbors, cfg.deviation))
