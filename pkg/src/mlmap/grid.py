"""Sparse voxel storage shared by every map layer.

A grid holds one fixed-width row of floats per materialized cell. What the
row means is decided by the layer kind:

``dirichlet``  K concentration parameters
``beta``       (alpha, beta)
``gaussian``   (kernel-weighted sum of measurements, kernel weight sum)

Rows are stored as ``prior + evidence``. Evidence is kept as int64 fixed
point in units of 2**-40, so accumulation is associative: the same set of
kernel contributions gives bit-identical cells no matter how it is ordered or
split into batches. The resolution (about 9e-13) is far below any modelling
tolerance, and a cell can hold up to about 8e6 units of evidence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import as_point, cell_centers, world_to_cells

LAYER_KINDS = ("dirichlet", "beta", "gaussian")

_BIAS = 1 << 20
_SPAN = 1 << 21

FRAC_BITS = 40
EVIDENCE_UNIT = 2.0**-FRAC_BITS
_EVIDENCE_LIMIT = 1 << 62


def quantize(x) -> np.ndarray:
    """Round real values to evidence units (int64)."""
    x = np.asarray(x, dtype=np.float64)
    if np.any(np.abs(x) >= _EVIDENCE_LIMIT * EVIDENCE_UNIT):
        raise OverflowError("value exceeds the evidence range of a cell")
    return np.rint(x * 2.0**FRAC_BITS).astype(np.int64)


def encode_cells(cells: np.ndarray) -> np.ndarray:
    """Pack (i, j, k) triples into single int64 keys."""
    c = np.asarray(cells, dtype=np.int64).reshape(-1, 3)
    if c.size and (c.min() < -_BIAS or c.max() >= _BIAS):
        raise ValueError("cell index outside the addressable range of +/-2^20")
    c = c + _BIAS
    return (c[:, 0] * _SPAN + c[:, 1]) * _SPAN + c[:, 2]


def decode_cells(keys: np.ndarray) -> np.ndarray:
    k = np.asarray(keys, dtype=np.int64)
    out = np.empty((k.size, 3), dtype=np.int64)
    out[:, 2] = k % _SPAN
    k = k // _SPAN
    out[:, 1] = k % _SPAN
    out[:, 0] = k // _SPAN
    return out - _BIAS


@dataclass(frozen=True)
class DirichletCell:
    alpha: np.ndarray


@dataclass(frozen=True)
class BetaCell:
    alpha: float
    beta: float


@dataclass(frozen=True)
class GaussianCell:
    weighted_sum: float
    weight_sum: float


class VoxelGrid:
    """Hash-addressed sparse voxel grid with a per-layer prior row.

    Cells are created lazily from ``prior`` and never removed.
    """

    def __init__(self, kind: str, prior, resolution: float = 0.1, origin=(0.0, 0.0, 0.0)):
        if kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {kind!r}")
        if not resolution > 0:
            raise ValueError("resolution must be positive")
        prior = np.asarray(prior, dtype=np.float64).ravel()
        if prior.size == 0 or not np.all(np.isfinite(prior)):
            raise ValueError("prior must be a non-empty finite vector")
        self.kind = kind
        self.prior = prior
        self.resolution = float(resolution)
        self.origin = as_point(origin)
        self._rows: dict[int, int] = {}
        self._keys = np.empty(0, dtype=np.int64)
        self._ev = np.empty((0, prior.size), dtype=np.int64)
        self._n = 0

    @property
    def width(self) -> int:
        return self.prior.size

    def __len__(self) -> int:
        return self._n

    def __contains__(self, cell) -> bool:
        return int(encode_cells(np.asarray(cell))[0]) in self._rows

    @property
    def keys(self) -> np.ndarray:
        return self._keys[: self._n]

    @property
    def coords(self) -> np.ndarray:
        return decode_cells(self.keys)

    @property
    def evidence(self) -> np.ndarray:
        """Live int64 view of accumulated evidence per cell, ordered by creation."""
        return self._ev[: self._n]

    @property
    def values(self) -> np.ndarray:
        """Per-cell rows (prior + evidence) as a new float array, ordered by creation."""
        return self.prior + self.evidence * EVIDENCE_UNIT

    def add_evidence(self, rows: np.ndarray, increments: np.ndarray) -> None:
        """``evidence[rows[i]] += increments[i]`` for every i (repeated rows allowed)."""
        np.add.at(self._ev, rows, increments)
        if rows.size and np.abs(self._ev[np.unique(rows)]).max() >= _EVIDENCE_LIMIT:
            raise OverflowError("cell evidence exceeds the fixed-point range")

    def centers(self) -> np.ndarray:
        return cell_centers(self.coords, self.resolution, self.origin)

    def row(self, cell) -> np.ndarray:
        """Copy of the cell's row, or the prior if the cell was never touched."""
        r = self._rows.get(int(encode_cells(np.asarray(cell))[0]))
        return self.prior.copy() if r is None else self.prior + self._ev[r] * EVIDENCE_UNIT

    def rows_for_keys(self, keys: np.ndarray, create: bool = False) -> np.ndarray:
        """Row indices for ``keys``; ``-1`` for missing cells unless ``create``.

        Created cells are appended in order of first appearance in ``keys``.
        """
        keys = np.asarray(keys, dtype=np.int64).ravel()
        ukeys, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
        get = self._rows.get
        urows = np.fromiter((get(k, -1) for k in ukeys.tolist()), dtype=np.int64, count=ukeys.size)
        if create:
            missing = np.flatnonzero(urows < 0)
            if missing.size:
                missing = missing[np.argsort(first[missing], kind="stable")]
                start = self._grow(ukeys[missing])
                urows[missing] = start + np.arange(missing.size)
                self._rows.update(zip(ukeys[missing].tolist(), urows[missing].tolist()))
        return urows[inverse.ravel()]

    def rows_for_points(self, points, create: bool = False) -> np.ndarray:
        return self.rows_for_keys(encode_cells(world_to_cells(points, self.resolution, self.origin)), create)

    def values_for_keys(self, keys) -> tuple[np.ndarray, np.ndarray]:
        """Rows of the cells ``keys`` (prior where unmapped) and a mapped mask."""
        rows = self.rows_for_keys(keys)
        mapped = rows >= 0
        out = np.broadcast_to(self.prior, (rows.size, self.width)).copy()
        out[mapped] += self._ev[rows[mapped]] * EVIDENCE_UNIT
        return out, mapped

    def values_at(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Rows of the cells containing ``points`` (prior where unmapped) and a mapped mask."""
        return self.values_for_keys(encode_cells(world_to_cells(points, self.resolution, self.origin)))

    def _grow(self, new_keys: np.ndarray) -> int:
        start, need = self._n, self._n + new_keys.size
        if need > self._keys.size:
            cap = max(need, 2 * self._keys.size, 64)
            keys = np.empty(cap, dtype=np.int64)
            ev = np.empty((cap, self.width), dtype=np.int64)
            keys[: self._n] = self._keys[: self._n]
            ev[: self._n] = self._ev[: self._n]
            self._keys, self._ev = keys, ev
        self._keys[start:need] = new_keys
        self._ev[start:need] = 0
        self._n = need
        return start

    def cell(self, cell):
        r = self.row(cell)
        if self.kind == "dirichlet":
            return DirichletCell(r)
        if self.kind == "beta":
            return BetaCell(float(r[0]), float(r[1]))
        return GaussianCell(float(r[0]), float(r[1]))

    def set_evidence(self, coords, evidence) -> None:
        """Overwrite (creating if needed) the evidence of the given cells."""
        evidence = np.asarray(evidence, dtype=np.int64).reshape(-1, self.width)
        rows = self.rows_for_keys(encode_cells(coords), create=True)
        self._ev[rows] = evidence

    def set_rows(self, coords, values) -> None:
        """Overwrite cells so their rows equal ``values`` (up to the evidence resolution)."""
        values = np.asarray(values, dtype=np.float64).reshape(-1, self.width)
        self.set_evidence(coords, quantize(values - self.prior))

    def copy(self) -> "VoxelGrid":
        g = VoxelGrid(self.kind, self.prior, self.resolution, self.origin)
        g.set_evidence(self.coords, self.evidence)
        return g

    def same_layout(self, other: "VoxelGrid") -> bool:
        return self.resolution == other.resolution and np.array_equal(self.origin, other.origin)

    def __eq__(self, other) -> bool:
        """Exact equality of kind, geometry, prior and every cell row (order-insensitive)."""
        if not isinstance(other, VoxelGrid):
            return NotImplemented
        if (self.kind, self.width, len(self)) != (other.kind, other.width, len(other)):
            return False
        if not (self.same_layout(other) and np.array_equal(self.prior, other.prior)):
            return False
        a, b = np.argsort(self.keys), np.argsort(other.keys)
        return bool(np.array_equal(self.keys[a], other.keys[b])
                    and np.array_equal(self.evidence[a], other.evidence[b]))

    def __repr__(self) -> str:
        return f"VoxelGrid(kind={self.kind!r}, cells={len(self)}, resolution={self.resolution})"


def dirichlet_grid(num_classes: int, prior=0.001, resolution: float = 0.1, origin=(0.0, 0.0, 0.0)) -> VoxelGrid:
    p = np.broadcast_to(np.asarray(prior, dtype=np.float64), (num_classes,))
    if num_classes < 2 or np.any(p <= 0):
        raise ValueError("need K >= 2 classes and positive concentration priors")
    return VoxelGrid("dirichlet", p, resolution, origin)


def beta_grid(prior_alpha=0.001, prior_beta=0.001, resolution: float = 0.1, origin=(0.0, 0.0, 0.0)) -> VoxelGrid:
    if not (prior_alpha > 0 and prior_beta > 0):
        raise ValueError("Beta priors must be positive")
    return VoxelGrid("beta", [prior_alpha, prior_beta], resolution, origin)


def gaussian_grid(resolution: float = 0.1, origin=(0.0, 0.0, 0.0)) -> VoxelGrid:
    return VoxelGrid("gaussian", [0.0, 0.0], resolution, origin)
