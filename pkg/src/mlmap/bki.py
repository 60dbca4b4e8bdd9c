"""Kernel-weighted accumulation of per-point evidence into grid cells.

Every layer update reduces to ``row[cell] += k(center(cell), x_i) * value_i``
summed over training points. Cells are the ones whose centers fall inside the
kernel support of at least one point.
"""

from __future__ import annotations

import numpy as np

from .geometry import cell_centers, world_to_cells
from .grid import VoxelGrid, decode_cells, encode_cells, quantize
from .kernel import KernelParams, PointIndex, build_index, sparse_kernel


def support_offsets(length_scale: float, resolution: float) -> np.ndarray:
    """Integer cell offsets that can hold a center within ``length_scale`` of a
    point lying anywhere inside the origin cell."""
    reach = length_scale + resolution * np.sqrt(3.0) / 2.0
    m = int(np.ceil(reach / resolution))
    r = np.arange(-m, m + 1)
    off = np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1).reshape(-1, 3)
    keep = np.sqrt((off.astype(np.float64) ** 2).sum(axis=1)) * resolution <= reach
    return off[keep]


def candidate_cells(points: np.ndarray, grid: VoxelGrid, length_scale: float) -> np.ndarray:
    """Cells (as keys) possibly within kernel support of ``points``, sorted."""
    if len(points) == 0:
        return np.empty(0, dtype=np.int64)
    own = np.unique(encode_cells(world_to_cells(points, grid.resolution, grid.origin)))
    base = decode_cells(own)
    off = support_offsets(length_scale, grid.resolution)
    dilated = (base[:, None, :] + off[None, :, :]).reshape(-1, 3)
    return np.unique(encode_cells(dilated))


def kernel_pairs(grid: VoxelGrid, index: PointIndex, kernel: KernelParams):
    """Kernel-supported (cell key, point position, weight) triples.

    Triples are ordered by ascending point id. Results are cached on the
    index, keyed by grid geometry and kernel, so several layers updated from
    one scan share the neighbor search.
    """
    cache_key = (grid.resolution, tuple(grid.origin.tolist()), kernel)
    hit = index.cache.get(cache_key)
    if hit is not None:
        return hit
    keys = candidate_cells(index.points, grid, kernel.length_scale)
    centers = cell_centers(decode_cells(keys), grid.resolution, grid.origin)
    ci, pi, d = index.pairs_within(centers, kernel.length_scale)
    order = np.argsort(index.ids[pi], kind="stable")
    result = keys[ci[order]], pi[order], sparse_kernel(d[order], kernel)
    index.cache[cache_key] = result
    return result


def accumulate(grid: VoxelGrid, values, kernel: KernelParams, index: PointIndex) -> VoxelGrid:
    """In-place ``row += sum_i k_i * values[i]`` over supported cells.

    ``values`` is (N, grid.width), aligned with ``index.points``. Touched cells
    that did not exist are created from the grid prior first. Each weight is
    rounded to evidence units before it multiplies the values, so integer
    payloads give increments that are exact integer multiples of it.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (len(index), grid.width):
        raise ValueError(f"values must be shaped ({len(index)}, {grid.width}), got {values.shape}")
    if len(index) == 0:
        return grid
    keys, pi, w = kernel_pairs(grid, index, kernel)
    if keys.size == 0:
        return grid
    qw = quantize(w).astype(np.float64)
    inc = qw[:, None] * values[pi]
    if inc.size and np.abs(inc).max() >= 2.0**53:
        raise OverflowError("kernel increment exceeds the fixed-point range")
    rows = grid.rows_for_keys(keys, create=True)
    grid.add_evidence(rows, np.rint(inc).astype(np.int64))
    return grid


def ensure_index(points, index: PointIndex | None) -> PointIndex:
    if index is None:
        return build_index(points)
    if len(index) != len(points) or not np.array_equal(index.points, np.asarray(points, dtype=np.float64)):
        raise ValueError("index was built over different points")
    return index
