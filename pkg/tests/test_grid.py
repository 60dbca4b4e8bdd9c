import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from mlmap.grid import (EVIDENCE_UNIT, FRAC_BITS, VoxelGrid, beta_grid, decode_cells, dirichlet_grid, encode_cells,
                        gaussian_grid, quantize)
from mlmap.rng import counter_uniforms

MASK64 = (1 << 64) - 1


def splitmix_finalize(x):
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9 & MASK64
    x = (x ^ (x >> 27)) * 0x94D049BB133111EB & MASK64
    return x ^ (x >> 31)


def reference_uniform(seed, stream, scan, key):
    """Same construction with Python integers."""
    g = 0x9E3779B97F4A7C15
    h = seed & MASK64
    for word in (stream, scan):
        h = splitmix_finalize((h + g + (word & MASK64)) & MASK64)
    h = splitmix_finalize(h ^ splitmix_finalize(((key & MASK64) + g) & MASK64))
    return (h >> 11) / 2**53


class TestKeys:
    @given(st.lists(st.tuples(*[st.integers(-(1 << 20), (1 << 20) - 1)] * 3), min_size=1, max_size=50))
    def test_round_trip(self, cells):
        c = np.array(cells)
        assert np.array_equal(decode_cells(encode_cells(c)), c)

    def test_order_is_lexicographic(self):
        c = np.array([[0, 0, 1], [0, 1, -5], [-1, 9, 9], [0, 0, 0]])
        assert np.argsort(encode_cells(c)).tolist() == [2, 3, 0, 1]

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            encode_cells([[1 << 20, 0, 0]])


class TestQuantize:
    def test_exact_dyadics(self):
        assert quantize([0.5, -3.25, 10.0]).tolist() == [1 << (FRAC_BITS - 1), -13 << (FRAC_BITS - 2), 10 << FRAC_BITS]

    def test_overflow(self):
        with pytest.raises(OverflowError):
            quantize(2.0**23)

    @given(st.floats(-1e6, 1e6))
    def test_error_within_half_unit(self, x):
        assert abs(quantize(x) * EVIDENCE_UNIT - x) <= EVIDENCE_UNIT / 2


class TestVoxelGrid:
    def test_prior_for_unmapped(self):
        g = dirichlet_grid(3, 0.25)
        vals, mapped = g.values_at([[0.0, 0.0, 0.0]])
        assert vals.tolist() == [[0.25] * 3] and mapped.tolist() == [False]

    def test_set_rows_and_lookup(self):
        g = beta_grid(1.0, 2.0, 0.5, (-1, -1, -1))
        g.set_rows([[0, 0, 0]], [[3.0, 4.0]])
        vals, mapped = g.values_at([[-0.9, -0.6, -0.51], [-0.4, -0.9, -0.9]])
        assert vals.tolist() == [[3.0, 4.0], [1.0, 2.0]] and mapped.tolist() == [True, False]

    def test_growth_keeps_rows(self):
        g = gaussian_grid()
        rng = np.random.default_rng(0)
        cells = np.unique(rng.integers(-50, 50, (3000, 3)), axis=0)
        for part in np.array_split(cells, 7):
            g.set_rows(part, np.tile([1.5, 2.0], (len(part), 1)))
        assert len(g) == len(cells) and all(g.row(c).tolist() == [1.5, 2.0] for c in cells[::97])

    def test_evidence_overflow(self):
        g = beta_grid()
        g.set_rows([[0, 0, 0]], [[4e6, 0.001]])
        with pytest.raises(OverflowError):
            g.add_evidence(np.array([0]), np.array([[quantize(4e6), 0]]))

    def test_copy_independent(self):
        g = beta_grid()
        g.set_rows([[0, 0, 0]], [[2.0, 3.0]])
        h = g.copy()
        h.set_rows([[0, 0, 0]], [[5.0, 3.0]])
        assert np.allclose(g.row((0, 0, 0)), [2.0, 3.0], rtol=0, atol=EVIDENCE_UNIT) and g != h

    def test_equality_ignores_insertion_order(self):
        a, b = beta_grid(), beta_grid()
        a.set_rows([[0, 0, 0], [1, 0, 0]], [[2, 2], [3, 3]])
        b.set_rows([[1, 0, 0], [0, 0, 0]], [[3, 3], [2, 2]])
        assert a == b

    def test_invalid_construction(self):
        with pytest.raises(ValueError):
            VoxelGrid("poisson", [1.0], 0.1)
        with pytest.raises(ValueError):
            beta_grid(resolution=0.0)


class TestCounterUniforms:
    def test_matches_reference(self):
        keys = [0, 1, -1, 123456789, -(1 << 62), (1 << 62) + 5]
        for seed, stream, scan in [(0, 0, 0), (7, 1, 3), (2**40 + 1, 0, 999)]:
            got = counter_uniforms(seed, stream, scan, keys)
            assert got.tolist() == [reference_uniform(seed, stream, scan, k) for k in keys]

    def test_range_and_uniformity(self):
        u = counter_uniforms(3, 0, 0, np.arange(200_000))
        assert u.min() >= 0.0 and u.max() < 1.0
        assert stats.kstest(u, "uniform").pvalue > 1e-3

    def test_streams_differ(self):
        k = np.arange(1000)
        a, b, c = counter_uniforms(1, 0, 0, k), counter_uniforms(1, 1, 0, k), counter_uniforms(1, 0, 1, k)
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.1 and abs(np.corrcoef(a, c)[0, 1]) < 0.1

    @given(st.integers(0, 2**63), st.lists(st.integers(-(2**62), 2**62), min_size=1, max_size=20))
    def test_elementwise(self, seed, keys):
        whole = counter_uniforms(seed, 0, 0, keys)
        assert all(whole[i] == counter_uniforms(seed, 0, 0, [k])[0] for i, k in enumerate(keys))
