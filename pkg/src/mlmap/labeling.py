"""Self-supervised traversability labels from geometry.

Point clouds are fused into a 2.5D elevation map, each cell gets slope,
roughness and step height from a local plane fit, the three are combined into
a score in [0, 1], and the score map is projected into camera images through
per-pixel depth. A semantic pass then vetoes traversable labels on classes
that can never be driven on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .geometry import CameraIntrinsics, Pose, Raster, as_points, backproject_pixels

INVALID_LABEL = 255


@dataclass(frozen=True)
class TraversabilityLabelConfig:
    weights: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    s_crit: float = 1.0
    r_crit: float = 0.05
    h_crit: float = 0.12
    threshold: float = 0.5
    window: int = 1
    window_radius: float = 0.3
    resolution: float = 0.1
    untraversable_classes: tuple[int, ...] = ()

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "untraversable_classes", tuple(int(c) for c in self.untraversable_classes))
        if len(w) != 3 or min(w) < 0 or abs(sum(w) - 1.0) > 1e-9:
            raise ValueError("weights must be three non-negative numbers summing to 1")
        if min(self.s_crit, self.r_crit, self.h_crit) <= 0:
            raise ValueError("critical values must be positive")
        if not 0 < self.threshold < 1:
            raise ValueError("score threshold must lie in (0, 1)")
        if self.window < 1 or self.window_radius <= 0 or self.resolution <= 0:
            raise ValueError("window length, window radius and resolution must be positive")


@dataclass
class ElevationMap:
    """Dense 2D grid over the bounding box of the fused points.

    Cell (ii, jj) of the arrays is world cell (ii + offset[0], jj + offset[1]),
    covering ``origin + cell * resolution`` in x and y. Empty cells have
    ``count == 0`` and NaN mean/variance.
    """

    resolution: float
    origin: np.ndarray
    offset: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    count: np.ndarray

    @property
    def shape(self):
        return self.mean.shape

    def world_cells(self, xy) -> np.ndarray:
        xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
        return np.floor((xy - self.origin) / self.resolution).astype(np.int64)

    def array_index(self, xy):
        """Array indices for xy positions plus a mask of positions inside the map."""
        c = self.world_cells(xy) - self.offset
        inside = (c[:, 0] >= 0) & (c[:, 1] >= 0) & (c[:, 0] < self.shape[0]) & (c[:, 1] < self.shape[1])
        c[~inside] = 0
        return c[:, 0], c[:, 1], inside

    def height(self, cell) -> float:
        i, j = np.asarray(cell[:2]) - self.offset
        return float(self.mean[i, j])


def build_elevation_map(clouds, poses, resolution: float = 0.1, origin=(0.0, 0.0)) -> ElevationMap:
    """Fuse sensor-frame clouds into per-cell height mean and sample variance.

    Points are put in a canonical (cell, height) order before reduction, so
    the result does not depend on point or frame order.
    """
    clouds = list(clouds)
    poses = list(poses)
    if len(clouds) != len(poses):
        raise ValueError(f"got {len(clouds)} clouds but {len(poses)} poses")
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    origin = np.asarray(origin, dtype=np.float64)
    world = [pose.apply(as_points(c)) for c, pose in zip(clouds, poses)]
    pts = np.concatenate(world) if world else np.empty((0, 3))
    if len(pts) == 0:
        return ElevationMap(resolution, origin, np.zeros(2, np.int64), np.full((0, 0), np.nan),
                            np.full((0, 0), np.nan), np.zeros((0, 0), np.int64))
    cells = np.floor((pts[:, :2] - origin) / resolution).astype(np.int64)
    order = np.lexsort((pts[:, 2], cells[:, 1], cells[:, 0]))
    cells, z = cells[order], pts[order, 2]
    ucells, start, counts = np.unique(cells, axis=0, return_index=True, return_counts=True)
    mean = np.add.reduceat(z, start) / counts
    dev = z - np.repeat(mean, counts)
    ss = np.add.reduceat(dev * dev, start)
    var = np.where(counts > 1, ss / np.maximum(counts - 1, 1), 0.0)

    offset = ucells.min(axis=0)
    shape = tuple(ucells.max(axis=0) - offset + 1)
    ii, jj = (ucells - offset).T
    M = np.full(shape, np.nan)
    V = np.full(shape, np.nan)
    C = np.zeros(shape, dtype=np.int64)
    M[ii, jj], V[ii, jj], C[ii, jj] = mean, var, counts
    return ElevationMap(resolution, origin, offset, M, V, C)


def _window_offsets(radius: float, resolution: float) -> np.ndarray:
    m = int(np.floor(radius / resolution + 1e-9))
    r = np.arange(-m, m + 1)
    di, dj = np.meshgrid(r, r, indexing="ij")
    keep = (di * di + dj * dj) * resolution**2 <= radius**2 + 1e-12
    return np.stack([di[keep], dj[keep]], axis=1)


def terrain_features(emap: ElevationMap, cell, window_radius: float = 0.3):
    """(slope rad, roughness m, step height m) at a world cell, or None.

    None is returned when the cell is empty or fewer than three non-empty
    cells fall inside the window.
    """
    ci, cj = int(cell[0]) - emap.offset[0], int(cell[1]) - emap.offset[1]
    H, W = emap.shape
    if not (0 <= ci < H and 0 <= cj < W) or emap.count[ci, cj] == 0:
        return None
    off = _window_offsets(window_radius, emap.resolution)
    ii, jj = ci + off[:, 0], cj + off[:, 1]
    ok = (ii >= 0) & (jj >= 0) & (ii < H) & (jj < W)
    off, ii, jj = off[ok], ii[ok], jj[ok]
    ok = emap.count[ii, jj] > 0
    if ok.sum() < 3:
        return None
    h = emap.mean[ii[ok], jj[ok]]
    d = off[ok] * emap.resolution
    A = np.column_stack([d, np.ones(len(d))])
    coef = np.linalg.lstsq(A, h, rcond=None)[0]
    resid = h - A @ coef
    slope = float(np.arctan(np.hypot(coef[0], coef[1])))
    rough = float(np.sqrt(np.mean(resid**2)))
    step = float(np.max(np.abs(h - emap.mean[ci, cj])))
    return slope, rough, step


def terrain_feature_maps(emap: ElevationMap, window_radius: float = 0.3):
    """Slope, roughness and step-height arrays for every cell (NaN where undefined).

    Same definitions as :func:`terrain_features`, evaluated for the whole map
    at once by summing plane-fit normal equations over shifted copies.
    """
    H, W = emap.shape
    off = _window_offsets(window_radius, emap.resolution)
    m = int(np.abs(off).max()) if len(off) else 0
    pad = np.pad(emap.mean, m, constant_values=np.nan)
    center = emap.mean

    def shifted(di, dj):
        return pad[m + di : m + di + H, m + dj : m + dj + W]

    N = np.zeros((H, W, 3, 3))
    b = np.zeros((H, W, 3))
    cnt = np.zeros((H, W))
    step = np.zeros((H, W))
    for di, dj in off:
        h = shifted(di, dj)
        ok = ~np.isnan(h)
        hv = np.where(ok, h, 0.0)
        x = np.array([di * emap.resolution, dj * emap.resolution, 1.0])
        N += ok[..., None, None] * np.outer(x, x)
        b += (ok * hv)[..., None] * x
        cnt += ok
        step = np.fmax(step, np.where(ok, np.abs(hv - center), 0.0))
    valid = (cnt >= 3) & ~np.isnan(center)
    coef = np.full((H, W, 3), np.nan)
    if valid.any():
        coef[valid] = np.einsum("nij,nj->ni", np.linalg.pinv(N[valid]), b[valid])
    ss = np.zeros((H, W))
    for di, dj in off:
        h = shifted(di, dj)
        ok = ~np.isnan(h)
        pred = coef[..., 0] * di * emap.resolution + coef[..., 1] * dj * emap.resolution + coef[..., 2]
        ss += np.where(ok, (np.where(ok, h, 0.0) - pred) ** 2, 0.0)
    slope = np.where(valid, np.arctan(np.hypot(coef[..., 0], coef[..., 1])), np.nan)
    rough = np.where(valid, np.sqrt(ss / np.maximum(cnt, 1)), np.nan)
    step = np.where(valid, step, np.nan)
    return slope, rough, step


def traversability_score(s, r, h, cfg: TraversabilityLabelConfig):
    """Weighted linear score, zeroed when any feature exceeds its critical value."""
    s, r, h = (np.asarray(v, dtype=np.float64) for v in (s, r, h))
    if np.any(s < 0) or np.any(r < 0) or np.any(h < 0):
        raise ValueError("terrain features must be non-negative")
    w1, w2, w3 = cfg.weights
    t = 1.0 - w1 * s / cfg.s_crit - w2 * r / cfg.r_crit - w3 * h / cfg.h_crit
    t = np.where((s > cfg.s_crit) | (r > cfg.r_crit) | (h > cfg.h_crit), 0.0, np.clip(t, 0.0, 1.0))
    return t if t.ndim else float(t)


@dataclass
class ScoreMap:
    """Traversability scores on the geometry of an elevation map (NaN = unknown)."""

    elevation: ElevationMap
    score: np.ndarray

    def lookup(self, points) -> np.ndarray:
        ii, jj, inside = self.elevation.array_index(np.asarray(points)[:, :2])
        out = np.full(len(ii), np.nan)
        out[inside] = self.score[ii[inside], jj[inside]]
        return out


def score_map(emap: ElevationMap, cfg: TraversabilityLabelConfig) -> ScoreMap:
    s, r, h = terrain_feature_maps(emap, cfg.window_radius)
    valid = ~np.isnan(s)
    score = np.full(emap.shape, np.nan)
    score[valid] = traversability_score(s[valid], r[valid], h[valid], cfg)
    return ScoreMap(emap, score)


def project_labels_to_image(smap: ScoreMap, depth: Raster, pose: Pose, intr: CameraIntrinsics,
                            threshold: float = 0.5) -> Raster:
    """Binary label raster (1 = traversable); pixels without depth or score are invalid."""
    data = np.full(depth.shape, INVALID_LABEL, dtype=np.uint8)
    mask = np.zeros(depth.shape, dtype=bool)
    rows, cols = np.nonzero(depth.mask)
    if rows.size:
        pts = backproject_pixels(cols, rows, depth.data[rows, cols], pose, intr)
        sc = smap.lookup(pts)
        known = ~np.isnan(sc)
        r, c = rows[known], cols[known]
        data[r, c] = (sc[known] >= threshold).astype(np.uint8)
        mask[r, c] = True
    return Raster("binary", data, mask)


def semantic_noise_filter(labels: Raster, semantics: Raster, untraversable_classes) -> Raster:
    """Relabel traversable pixels whose semantic class is never traversable."""
    if labels.shape != semantics.shape:
        raise ValueError(f"label raster {labels.shape} and semantic raster {semantics.shape} differ in size")
    veto = np.isin(semantics.data, list(untraversable_classes)) & semantics.mask & labels.mask
    data = labels.data.copy()
    data[veto & (data == 1)] = 0
    return Raster(labels.kind, data, labels.mask.copy())


class TraversabilityLabeler(BaseEstimator):
    """Fit on a window of clouds and poses, then label camera views.

    >>> lab = TraversabilityLabeler().fit(clouds, poses)   # doctest: +SKIP
    >>> labels = lab.label(depth, pose, intr, semantics)   # doctest: +SKIP
    """

    def __init__(self, weights=(1 / 3, 1 / 3, 1 / 3), s_crit=1.0, r_crit=0.05, h_crit=0.12, threshold=0.5,
                 window_radius=0.3, resolution=0.1, untraversable_classes=()):
        self.weights = weights
        self.s_crit = s_crit
        self.r_crit = r_crit
        self.h_crit = h_crit
        self.threshold = threshold
        self.window_radius = window_radius
        self.resolution = resolution
        self.untraversable_classes = untraversable_classes

    def fit(self, clouds, poses):
        self.config_ = TraversabilityLabelConfig(
            self.weights, self.s_crit, self.r_crit, self.h_crit, self.threshold,
            1, self.window_radius, self.resolution, self.untraversable_classes)
        self.elevation_map_ = build_elevation_map(clouds, poses, self.resolution)
        self.score_map_ = score_map(self.elevation_map_, self.config_)
        return self

    def label(self, depth: Raster, pose: Pose, intr: CameraIntrinsics, semantics: Raster | None = None) -> Raster:
        out = project_labels_to_image(self.score_map_, depth, pose, intr, self.threshold)
        if semantics is not None and self.untraversable_classes:
            out = semantic_noise_filter(out, semantics, self.untraversable_classes)
        return out
