"""Compactly supported sparse kernel and the k-d tree over training points."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .geometry import as_point, as_points

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class KernelParams:
    length_scale: float = 0.3
    scale: float = 10.0

    def __post_init__(self):
        if not (self.length_scale > 0 and self.scale > 0):
            raise ValueError("kernel length scale and scale must be positive")


def sparse_kernel(d, params: KernelParams):
    """Sparse kernel weight for distance(s) ``d``; exactly zero for d >= length scale.

    Near the support edge the closed form cancels to O((1 - d/l)^5), so tiny
    negative round-off is clipped to zero.
    """
    d = np.asarray(d, dtype=np.float64)
    if np.any(d < 0) or np.any(np.isnan(d)):
        raise ValueError("kernel distance must be non-negative")
    r = d / params.length_scale
    inside = r < 1.0
    rr = np.where(inside, r, 1.0)
    val = (2.0 + np.cos(TWO_PI * rr)) / 3.0 * (1.0 - rr) + np.sin(TWO_PI * rr) / TWO_PI
    out = np.where(inside, params.scale * np.maximum(val, 0.0), 0.0)
    return out if out.ndim else float(out)


def sparse_kernel_value(d: float, params: KernelParams) -> float:
    return float(sparse_kernel(float(d), params))


class PointIndex:
    """Immutable k-d tree over training point positions.

    ``ids`` tag each point (default ``0..N-1``); they fix the summation order
    of kernel accumulation and must be unique.
    """

    def __init__(self, points, ids=None):
        self.points = as_points(points).copy()
        self.points.flags.writeable = False
        n = len(self.points)
        self.ids = np.arange(n, dtype=np.int64) if ids is None else np.asarray(ids, dtype=np.int64).ravel()
        if self.ids.shape != (n,):
            raise ValueError("ids must have one entry per point")
        if np.unique(self.ids).size != n:
            raise ValueError("point ids must be unique")
        self._tree = cKDTree(self.points) if n else None
        self.cache: dict = {}

    def __len__(self) -> int:
        return len(self.points)

    def neighbors_within(self, center, radius: float) -> list[tuple[int, float]]:
        """Every stored point strictly closer than ``radius``, as (id, distance)."""
        if not radius > 0:
            raise ValueError("radius must be positive")
        c = as_point(center)
        if self._tree is None:
            return []
        cand = np.asarray(self._tree.query_ball_point(c, radius), dtype=np.int64)
        d = np.sqrt(((self.points[cand] - c) ** 2).sum(axis=1))
        keep = d < radius
        return list(zip(self.ids[cand[keep]].tolist(), d[keep].tolist()))

    def pairs_within(self, centers, radius: float):
        """All (center, point) pairs with distance strictly below ``radius``.

        Returns arrays ``(center_idx, point_idx, distance)``; point_idx indexes
        ``self.points`` (not ``ids``).
        """
        if not radius > 0:
            raise ValueError("radius must be positive")
        centers = as_points(centers)
        empty = (np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0))
        if self._tree is None or len(centers) == 0:
            return empty
        ctree = cKDTree(centers)
        sdm = ctree.sparse_distance_matrix(self._tree, radius, output_type="ndarray")
        ci = sdm["i"].astype(np.int64)
        pi = sdm["j"].astype(np.int64)
        # Recompute distances so the strict boundary test does not depend on tree internals.
        d = np.sqrt(((centers[ci] - self.points[pi]) ** 2).sum(axis=1))
        keep = d < radius
        return ci[keep], pi[keep], d[keep]


def build_index(points, ids=None) -> PointIndex:
    return PointIndex(points, ids)


def neighbors_within(index: PointIndex, center, radius: float) -> list[tuple[int, float]]:
    return index.neighbors_within(center, radius)
