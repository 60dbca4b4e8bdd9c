"""Scalar (friction-style) layer with a kernelized conjugate Gaussian posterior,
and the three-source traversability update that consumes it."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .bki import accumulate, ensure_index
from .geometry import as_points
from .grid import GaussianCell, VoxelGrid, gaussian_grid
from .kernel import KernelParams, PointIndex
from .rng import PSEUDO_FRICTION
from .traversability import check_binary, semantic_pseudo_measurements, cell_draws, update_beta


@dataclass(frozen=True)
class GaussianLayerConfig:
    """Prior mean, known observation variance, prior confidence (so the prior
    variance is noise_variance / prior_confidence) and the traversable band."""

    prior_mean: float = 0.5
    noise_variance: float = 0.04
    prior_confidence: float = 1.0
    d_low: float = 0.3
    d_high: float = 1.0

    def __post_init__(self):
        if not (self.noise_variance > 0 and self.prior_confidence > 0):
            raise ValueError("noise variance and prior confidence must be positive")
        if not self.d_low < self.d_high:
            raise ValueError("d_low must be below d_high")


def update_gaussian(grid: VoxelGrid, points, f, kernel: KernelParams, index: PointIndex | None = None) -> VoxelGrid:
    points = as_points(points)
    f = np.asarray(f, dtype=np.float64).ravel()
    if f.size != len(points):
        raise ValueError("one measurement per point required")
    if not np.all(np.isfinite(f)):
        raise ValueError("scalar measurements must be finite")
    return accumulate(grid, np.column_stack([f, np.ones_like(f)]), kernel, ensure_index(points, index))


def gaussian_moments(rows, cfg: GaussianLayerConfig):
    rows = np.atleast_2d(rows)
    denom = cfg.prior_confidence + rows[:, 1]
    return (cfg.prior_confidence * cfg.prior_mean + rows[:, 0]) / denom, cfg.noise_variance / denom


def query_gaussian(cell: GaussianCell, cfg: GaussianLayerConfig) -> tuple[float, float]:
    E, V = gaussian_moments([cell.weighted_sum, cell.weight_sum], cfg)
    return float(E[0]), float(V[0])


def gaussian_to_bernoulli(E, V, d_low: float, d_high: float):
    """Pr(d_low <= mu <= d_high) for mu ~ N(E, V)."""
    if not d_low < d_high:
        raise ValueError("d_low must be below d_high")
    V = np.asarray(V, dtype=np.float64)
    if np.any(V <= 0):
        raise ValueError("variance must be positive")
    sd = np.sqrt(V)
    p = ndtr((d_high - np.asarray(E)) / sd) - ndtr((d_low - np.asarray(E)) / sd)
    p = np.clip(p, 0.0, 1.0)
    return p if p.ndim else float(p)


def friction_pseudo_measurements(friction_grid: VoxelGrid, cfg: GaussianLayerConfig, points, seed=0, scan_index=0):
    def prob(rows):
        E, V = gaussian_moments(rows, cfg)
        return gaussian_to_bernoulli(E, V, cfg.d_low, cfg.d_high)

    return cell_draws(friction_grid, as_points(points), prob, seed, scan_index, PSEUDO_FRICTION)


def update_traversability_threeway(trav_grid: VoxelGrid, sem_grid: VoxelGrid | None, friction_grid: VoxelGrid,
                                   cfg: GaussianLayerConfig, points, z, kernel: KernelParams,
                                   traversable_classes=(), index: PointIndex | None = None, *, seed: int = 0,
                                   scan_index: int = 0, pseudo=None, friction_pseudo=None) -> VoxelGrid:
    """alpha += k (y' + f' + z), beta += k (3 - y' - f' - z).

    Without a semantic grid (and no injected ``pseudo``) the semantic term is
    dropped and the update is two-source over (f', z).
    """
    points = as_points(points)
    z = check_binary(z)
    if z.size != len(points):
        raise ValueError("one label per point required")
    for g in (sem_grid, friction_grid):
        if g is not None and not g.same_layout(trav_grid):
            raise ValueError("all layers must share resolution and origin")
    if friction_pseudo is None:
        friction_pseudo = friction_pseudo_measurements(friction_grid, cfg, points, seed, scan_index)
    fp = check_binary(friction_pseudo)
    if pseudo is None and sem_grid is not None:
        pseudo = semantic_pseudo_measurements(sem_grid, points, traversable_classes, seed, scan_index)
    if pseudo is None:
        return update_beta(trav_grid, points, fp + z, 2, kernel, index)
    return update_beta(trav_grid, points, check_binary(pseudo) + fp + z, 3, kernel, index)


class FrictionBKI(RegressorMixin, BaseEstimator):
    """Continuous scalar map; ``predict`` returns the posterior mean of the
    voxel containing each query (and the variance with ``return_var``)."""

    def __init__(self, prior_mean=0.5, noise_variance=0.04, prior_confidence=1.0, d_low=0.3, d_high=1.0,
                 length_scale=0.3, kernel_scale=10.0, resolution=0.1, origin=(0.0, 0.0, 0.0)):
        self.prior_mean = prior_mean
        self.noise_variance = noise_variance
        self.prior_confidence = prior_confidence
        self.d_low = d_low
        self.d_high = d_high
        self.length_scale = length_scale
        self.kernel_scale = kernel_scale
        self.resolution = resolution
        self.origin = origin

    def _init_map(self):
        self.config_ = GaussianLayerConfig(self.prior_mean, self.noise_variance, self.prior_confidence,
                                           self.d_low, self.d_high)
        self.kernel_ = KernelParams(self.length_scale, self.kernel_scale)
        self.grid_ = gaussian_grid(self.resolution, self.origin)

    def fit(self, X, y, index=None):
        self._init_map()
        return self.partial_fit(X, y, index=index)

    def partial_fit(self, X, y, index=None):
        if not hasattr(self, "grid_"):
            self._init_map()
        update_gaussian(self.grid_, X, y, self.kernel_, index)
        return self

    def predict(self, X, return_var=False):
        check_is_fitted(self, "grid_")
        E, V = gaussian_moments(self.grid_.values_at(as_points(X))[0], self.config_)
        return (E, V) if return_var else E

    def traversable_probability(self, X):
        E, V = self.predict(X, return_var=True)
        return gaussian_to_bernoulli(E, V, self.d_low, self.d_high)
