"""Counter-based uniforms keyed by (seed, stream, scan, cell).

Each draw is a pure function of its key, so results do not depend on the
order in which cells are visited. Mixing uses the SplitMix64 finalizer.
"""

from __future__ import annotations

import numpy as np

PSEUDO_SEMANTIC = 0
PSEUDO_FRICTION = 1

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(x: np.ndarray) -> np.ndarray:
    x = x ^ (x >> np.uint64(30))
    x = x * _M1
    x = x ^ (x >> np.uint64(27))
    x = x * _M2
    return x ^ (x >> np.uint64(31))


def counter_uniforms(seed: int, stream: int, scan: int, keys) -> np.ndarray:
    """Uniform [0, 1) doubles, one per int64 key."""
    k = np.asarray(keys, dtype=np.int64).astype(np.uint64).ravel()
    with np.errstate(over="ignore"):
        h = np.full(k.shape, np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
        for word in (stream, scan):
            h = _mix(h + _GOLDEN + np.uint64(word & 0xFFFFFFFFFFFFFFFF))
        h = _mix(h ^ _mix(k + _GOLDEN))
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
