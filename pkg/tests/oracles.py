"""Independent reference implementations used as test oracles.

Nothing here imports the package's numerical code: kernels, neighbor sets and
posterior updates are recomputed by brute force over every (cell, point) pair.
"""

import math

import numpy as np


def kernel_scalar(d, length_scale, scale):
    if d >= length_scale:
        return 0.0
    r = d / length_scale
    v = (2.0 + math.cos(2.0 * math.pi * r)) / 3.0 * (1.0 - r) + math.sin(2.0 * math.pi * r) / (2.0 * math.pi)
    return scale * max(v, 0.0)


def brute_neighbors(points, center, radius):
    out = {}
    for i, p in enumerate(points):
        d = math.dist(p, center)
        if d < radius:
            out[i] = d
    return out


def lattice_cells(points, resolution, origin, length_scale):
    """Every cell whose center lies strictly within ``length_scale`` of some point."""
    points = np.asarray(points, dtype=float)
    origin = np.asarray(origin, dtype=float)
    lo = np.floor((points.min(0) - length_scale - origin) / resolution).astype(int) - 1
    hi = np.floor((points.max(0) + length_scale - origin) / resolution).astype(int) + 1
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    cells = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, 3)
    centers = origin + (cells + 0.5) * resolution
    keep = np.zeros(len(cells), dtype=bool)
    for chunk in range(0, len(cells), 4096):
        c = centers[chunk : chunk + 4096]
        d = np.sqrt(((c[:, None, :] - points[None, :, :]) ** 2).sum(-1))
        keep[chunk : chunk + 4096] = (d < length_scale).any(1)
    return cells[keep]


def naive_posterior(cells, points, payload, prior, resolution, origin, length_scale, scale):
    """prior + sum_i k(center, x_i) payload_i via a double loop over cells and points."""
    centers = np.asarray(origin, dtype=float) + (np.asarray(cells) + 0.5) * resolution
    payload = np.asarray(payload, dtype=float)
    out = np.tile(np.asarray(prior, dtype=float), (len(centers), 1))
    for c, x in enumerate(centers):
        for i, p in enumerate(points):
            k = kernel_scalar(math.dist(x, p), length_scale, scale)
            if k:
                out[c] += k * payload[i]
    return out


def beta_mode_mean_var(a, b):
    mode = (a - 1) / (a + b - 2) if a > 1 and b > 1 else None
    return mode, a / (a + b), a * b / ((a + b) ** 2 * (a + b + 1))


def dense_posterior(cells, points, payload, prior, resolution, origin, length_scale, scale):
    """Same sum as :func:`naive_posterior`, over the full cell-by-point distance matrix."""
    centers = np.asarray(origin, dtype=float) + (np.asarray(cells) + 0.5) * resolution
    d = np.sqrt(((centers[:, None, :] - np.asarray(points, dtype=float)[None, :, :]) ** 2).sum(-1))
    r = np.minimum(d / length_scale, 1.0)
    k = scale * np.maximum((2.0 + np.cos(2.0 * np.pi * r)) / 3.0 * (1.0 - r) + np.sin(2.0 * np.pi * r) / (2.0 * np.pi), 0)
    k[d >= length_scale] = 0.0
    return np.asarray(prior, dtype=float) + k @ np.asarray(payload, dtype=float)
