"""Semantic-traversability layer: kernelized Beta posterior per voxel.

Each training point carries a binary traversability label ``z``. When a
semantic grid is supplied, the Dirichlet posterior of the voxel containing
the point is collapsed to a Beta, a Bernoulli is deduced from it, and one
sample ``y'`` from that Bernoulli joins ``z`` as a second observation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .bki import accumulate, ensure_index
from .geometry import as_points, world_to_cells
from .grid import BetaCell, VoxelGrid, beta_grid, encode_cells
from .kernel import KernelParams, PointIndex
from .rng import PSEUDO_SEMANTIC, counter_uniforms
from .semantic import shrink_rows


@dataclass(frozen=True)
class TraversabilityConfig:
    prior_alpha: float = 0.001
    prior_beta: float = 0.001
    semantic_fusion: bool = True

    def __post_init__(self):
        if not (self.prior_alpha > 0 and self.prior_beta > 0):
            raise ValueError("Beta priors must be positive")


def deduce_probability(alpha, beta):
    """Bernoulli parameter deduced from Beta(alpha, beta).

    The mode when both parameters exceed one, the mean otherwise.
    """
    a = np.asarray(alpha, dtype=np.float64)
    b = np.asarray(beta, dtype=np.float64)
    has_mode = (a > 1) & (b > 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(has_mode, (a - 1.0) / (a + b - 2.0), a / (a + b))
    return p if p.ndim else float(p)


def deduce_pseudo_measurement(alpha: float, beta: float, rng: np.random.Generator) -> int:
    return int(rng.random() <= deduce_probability(alpha, beta))


def check_binary(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64).ravel()
    if not np.all((z == 0) | (z == 1)):
        raise ValueError("binary payloads must be 0 or 1")
    return z


def cell_draws(grid: VoxelGrid, points: np.ndarray, probability_of_rows, seed: int, scan_index: int, stream: int):
    """One Bernoulli draw per distinct cell of ``grid`` hit by ``points``.

    ``probability_of_rows`` maps the (prior-filled) rows of the containing
    cells to Bernoulli parameters. Points sharing a cell share the draw.
    """
    if len(points) == 0:
        return np.empty(0)
    keys = encode_cells(world_to_cells(points, grid.resolution, grid.origin))
    ukeys, inverse = np.unique(keys, return_inverse=True)
    vals, _ = grid.values_for_keys(ukeys)
    p = probability_of_rows(vals)
    u = counter_uniforms(seed, stream, scan_index, ukeys)
    return (u <= p).astype(np.float64)[inverse.ravel()]


def semantic_pseudo_measurements(sem_grid: VoxelGrid, points, traversable_classes, seed: int = 0, scan_index: int = 0):
    """Draw y' for each point from the semantic voxel that contains it."""
    points = as_points(points)
    mask = np.zeros(sem_grid.width, dtype=bool)
    mask[list(traversable_classes)] = True

    def prob(rows):
        a, b = shrink_rows(rows, mask)
        return deduce_probability(a, b)

    return cell_draws(sem_grid, points, prob, seed, scan_index, PSEUDO_SEMANTIC)


def update_beta(grid: VoxelGrid, points, successes, trials: int, kernel: KernelParams, index: PointIndex | None = None):
    """alpha += k * successes, beta += k * (trials - successes)."""
    points = as_points(points)
    s = np.asarray(successes, dtype=np.float64).ravel()
    if s.shape != (len(points),):
        raise ValueError("one observation per point required")
    if np.any(s < 0) or np.any(s > trials):
        raise ValueError("successes must lie in [0, trials]")
    return accumulate(grid, np.column_stack([s, trials - s]), kernel, ensure_index(points, index))


def update_traversability(trav_grid: VoxelGrid, sem_grid: VoxelGrid | None, points, z, kernel: KernelParams,
                          traversable_classes=(), index: PointIndex | None = None, *, seed: int = 0,
                          scan_index: int = 0, pseudo=None) -> VoxelGrid:
    """Fuse binary labels (and semantic pseudo-measurements) into ``trav_grid``.

    With ``sem_grid=None`` and no ``pseudo`` the semantic-free update
    ``alpha += k z, beta += k (1 - z)`` is applied. ``pseudo`` overrides the
    drawn y' values.
    """
    points = as_points(points)
    z = check_binary(z)
    if z.size != len(points):
        raise ValueError("one label per point required")
    if pseudo is None and sem_grid is not None:
        if not sem_grid.same_layout(trav_grid):
            raise ValueError("semantic and traversability grids must share resolution and origin")
        pseudo = semantic_pseudo_measurements(sem_grid, points, traversable_classes, seed, scan_index)
    if pseudo is None:
        return update_beta(trav_grid, points, z, 1, kernel, index)
    pseudo = check_binary(pseudo)
    if pseudo.size != z.size:
        raise ValueError("one pseudo-measurement per point required")
    return update_beta(trav_grid, points, pseudo + z, 2, kernel, index)


def beta_moments(alpha, beta):
    """MAP (NaN where undefined), mean and variance of Beta(alpha, beta)."""
    a = np.asarray(alpha, dtype=np.float64)
    b = np.asarray(beta, dtype=np.float64)
    s = a + b
    with np.errstate(divide="ignore", invalid="ignore"):
        mode = np.where((a > 1) & (b > 1), (a - 1.0) / (s - 2.0), np.nan)
    return mode, a / s, a * b / (s * s * (s + 1.0))


def query_traversability(cell: BetaCell):
    """``(map, mean, variance)``; ``map`` is None when alpha or beta <= 1."""
    mode, mean, var = beta_moments(cell.alpha, cell.beta)
    mode = float(mode)
    return (None if np.isnan(mode) else mode), float(mean), float(var)


def traversability_estimate(rows: np.ndarray, use_map: bool = False) -> np.ndarray:
    """Point estimate per Beta row: mean, or the MAP where it is defined."""
    mode, mean, _ = beta_moments(rows[:, 0], rows[:, 1])
    if use_map:
        return np.where(np.isnan(mode), mean, mode)
    return mean


class TraversabilityBKI(ClassifierMixin, BaseEstimator):
    """Traversability map estimator (class 1 = traversable).

    Pass a fitted :class:`~mlmap.semantic.SemanticBKI` (or its grid) as
    ``semantic_map`` to ``partial_fit`` to enable semantic fusion; a fitted
    :class:`~mlmap.gaussian.FrictionBKI` as ``friction_map`` adds the friction
    source. Each ``partial_fit`` call is one scan for RNG keying.
    """

    def __init__(self, prior_alpha=0.001, prior_beta=0.001, length_scale=0.3, kernel_scale=10.0,
                 resolution=0.1, origin=(0.0, 0.0, 0.0), semantic_fusion=True,
                 traversable_classes=(0, 1, 9), threshold=0.5, use_map=False, random_state=0):
        self.prior_alpha = prior_alpha
        self.prior_beta = prior_beta
        self.length_scale = length_scale
        self.kernel_scale = kernel_scale
        self.resolution = resolution
        self.origin = origin
        self.semantic_fusion = semantic_fusion
        self.traversable_classes = traversable_classes
        self.threshold = threshold
        self.use_map = use_map
        self.random_state = random_state

    def _init_map(self):
        self.kernel_ = KernelParams(self.length_scale, self.kernel_scale)
        self.grid_ = beta_grid(self.prior_alpha, self.prior_beta, self.resolution, self.origin)
        self.classes_ = np.array([0, 1])
        self.n_scans_ = 0

    def fit(self, X, y, semantic_map=None, friction_map=None, index=None):
        self._init_map()
        return self.partial_fit(X, y, semantic_map=semantic_map, friction_map=friction_map, index=index)

    def partial_fit(self, X, y, semantic_map=None, friction_map=None, index=None):
        if not hasattr(self, "grid_"):
            self._init_map()
        sem = getattr(semantic_map, "grid_", semantic_map) if self.semantic_fusion else None
        seed = int(self.random_state or 0)
        if friction_map is not None:
            from .gaussian import update_traversability_threeway

            update_traversability_threeway(
                self.grid_, sem, friction_map.grid_, friction_map.config_, X, y, self.kernel_,
                self.traversable_classes, index, seed=seed, scan_index=self.n_scans_)
        else:
            update_traversability(self.grid_, sem, X, y, self.kernel_, self.traversable_classes, index,
                                  seed=seed, scan_index=self.n_scans_)
        self.n_scans_ += 1
        return self

    def _rows(self, X):
        check_is_fitted(self, "grid_")
        return self.grid_.values_at(as_points(X))

    def predict_proba(self, X):
        p = traversability_estimate(self._rows(X)[0], self.use_map)
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= self.threshold).astype(np.int64)

    def predict_variance(self, X):
        rows = self._rows(X)[0]
        return beta_moments(rows[:, 0], rows[:, 1])[2]

    def is_mapped(self, X):
        return self._rows(X)[1]
