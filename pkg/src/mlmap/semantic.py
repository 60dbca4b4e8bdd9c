"""Continuous semantic layer: kernelized Dirichlet posterior per voxel."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .bki import accumulate, ensure_index
from .geometry import as_points
from .grid import DirichletCell, VoxelGrid, dirichlet_grid
from .kernel import KernelParams, PointIndex


@dataclass(frozen=True)
class SemanticConfig:
    """Class count, Dirichlet prior and the traversable class partition (0-based)."""

    num_classes: int = 19
    prior: float = 0.001
    traversable_classes: tuple[int, ...] = (0, 1, 9)

    def __post_init__(self):
        object.__setattr__(self, "traversable_classes", tuple(sorted(set(int(c) for c in self.traversable_classes))))
        if self.num_classes < 2:
            raise ValueError("need at least two classes")
        if not self.prior > 0:
            raise ValueError("Dirichlet prior must be positive")
        trav = self.traversable_classes
        if not trav or len(trav) >= self.num_classes or trav[0] < 0 or trav[-1] >= self.num_classes:
            raise ValueError("traversable classes must be a nonempty proper subset of the class range")

    def traversable_mask(self) -> np.ndarray:
        m = np.zeros(self.num_classes, dtype=bool)
        m[list(self.traversable_classes)] = True
        return m


def one_hot(labels, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ValueError("class labels must be one-dimensional")
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValueError(f"class label outside [0, {num_classes})")
    out = np.zeros((labels.size, num_classes))
    out[np.arange(labels.size), labels.astype(np.int64)] = 1.0
    return out


def check_one_hot(y, num_classes: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 2 or y.shape[1] != num_classes:
        raise ValueError(f"one-hot payloads must have length {num_classes}")
    if not (np.all((y == 0) | (y == 1)) and np.all(y.sum(axis=1) == 1)):
        raise ValueError("payloads are not valid one-hot vectors")
    return y


def update_semantic(grid: VoxelGrid, points, y, kernel: KernelParams, index: PointIndex | None = None) -> VoxelGrid:
    """alpha^k += sum_i k(x_cell, x_i) y_i^k for every cell inside kernel support."""
    points = as_points(points)
    y = check_one_hot(y, grid.width)
    if len(y) != len(points):
        raise ValueError("one payload per point required")
    return accumulate(grid, y, kernel, ensure_index(points, index))


def dirichlet_moments(alpha) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Expected probabilities, MAP class and per-class variance (row-wise)."""
    a = np.atleast_2d(np.asarray(alpha, dtype=np.float64))
    S = a.sum(axis=1, keepdims=True)
    mean = a / S
    var = a * (S - a) / (S * S * (S + 1.0))
    return mean, np.argmax(a, axis=1), var  # argmax takes the lowest index on ties


def query_semantic(cell: DirichletCell):
    mean, cls, var = dirichlet_moments(cell.alpha)
    return mean[0], int(cls[0]), var[0]


def shrink_to_beta(alpha, traversable_classes) -> tuple[float, float]:
    """Collapse Dirichlet concentrations into Beta(traversable sum, rest)."""
    a = np.asarray(alpha.alpha if isinstance(alpha, DirichletCell) else alpha, dtype=np.float64)
    m = np.zeros(a.shape[-1], dtype=bool)
    m[list(traversable_classes)] = True
    return float(a[..., m].sum()), float(a[..., ~m].sum())


def shrink_rows(alpha: np.ndarray, traversable_mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.atleast_2d(alpha)
    return a[:, traversable_mask].sum(axis=1), a[:, ~traversable_mask].sum(axis=1)


class SemanticBKI(ClassifierMixin, BaseEstimator):
    """Semantic occupancy map estimator.

    ``X`` is an (N, 3) array of positions, ``y`` holds integer class labels
    (or an (N, K) one-hot matrix). ``partial_fit`` fuses one scan; ``fit``
    starts from an empty map. Predictions describe the voxel containing each
    query position.
    """

    def __init__(self, num_classes=19, prior=0.001, length_scale=0.3, kernel_scale=10.0,
                 resolution=0.1, origin=(0.0, 0.0, 0.0)):
        self.num_classes = num_classes
        self.prior = prior
        self.length_scale = length_scale
        self.kernel_scale = kernel_scale
        self.resolution = resolution
        self.origin = origin

    def _init_map(self):
        self.kernel_ = KernelParams(self.length_scale, self.kernel_scale)
        self.grid_ = dirichlet_grid(self.num_classes, self.prior, self.resolution, self.origin)
        self.classes_ = np.arange(self.num_classes)
        self.n_scans_ = 0

    def fit(self, X, y, index=None):
        self._init_map()
        return self.partial_fit(X, y, index=index)

    def partial_fit(self, X, y, index=None):
        if not hasattr(self, "grid_"):
            self._init_map()
        y = np.asarray(y)
        payload = y if y.ndim == 2 else one_hot(y, self.num_classes)
        update_semantic(self.grid_, X, payload, self.kernel_, index)
        self.n_scans_ += 1
        return self

    def _alpha(self, X):
        check_is_fitted(self, "grid_")
        return self.grid_.values_at(as_points(X))

    def predict_proba(self, X):
        return dirichlet_moments(self._alpha(X)[0])[0]

    def predict(self, X):
        return dirichlet_moments(self._alpha(X)[0])[1]

    def predict_variance(self, X):
        return dirichlet_moments(self._alpha(X)[0])[2]

    def is_mapped(self, X):
        return self._alpha(X)[1]
