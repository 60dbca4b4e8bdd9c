import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from mlmap.geometry import (CameraIntrinsics, Pose, Raster, backproject_pixel, backproject_pixels, cell_centers,
                            project_point, project_points, valid_pixels_to_points, world_to_cell, world_to_cells)

finite = st.floats(-50, 50, allow_nan=False)
INTR = CameraIntrinsics(500.0, 500.0, 320.0, 240.0, 640, 480)


def random_pose(seed):
    rng = np.random.default_rng(seed)
    return Pose(Rotation.random(random_state=seed).as_matrix(), rng.normal(size=3))


class TestWorldToCell:
    def test_interior(self):
        assert world_to_cell((0.05, 0.05, 0.05), 0.1) == (0, 0, 0)

    def test_boundary_belongs_to_own_cell(self):
        assert world_to_cell((0, 0, 0), 0.1) == (0, 0, 0)

    def test_mixed_signs(self):
        assert world_to_cell((0.15, -0.05, 0.25), 0.1) == (1, -1, 2)

    def test_origin_shift(self):
        assert world_to_cell((1.0, 1.0, 1.0), 0.5, origin=(0.25, 0.25, 0.25)) == (1, 1, 1)

    @pytest.mark.parametrize("bad", [(np.nan, 0, 0), (0, np.inf, 0)])
    def test_non_finite(self, bad):
        with pytest.raises(ValueError):
            world_to_cell(bad, 0.1)

    def test_bad_resolution(self):
        with pytest.raises(ValueError):
            world_to_cell((0, 0, 0), 0.0)

    @given(st.tuples(finite, finite, finite), st.integers(0, 2))
    def test_translation_consistency(self, x, axis):
        # exact in binary: resolution 0.125
        res = 0.125
        x = np.round(np.asarray(x) * 64) / 64 + 1 / 256
        e = np.zeros(3)
        e[axis] = res
        a, b = np.array(world_to_cell(x, res)), np.array(world_to_cell(x + e, res))
        expect = np.zeros(3, int)
        expect[axis] = 1
        assert np.array_equal(b - a, expect)

    def test_vectorized_matches_scalar(self):
        pts = np.random.default_rng(0).uniform(-3, 3, (200, 3))
        cells = world_to_cells(pts, 0.1, (0.01, -0.02, 0.03))
        assert all(tuple(c) == world_to_cell(p, 0.1, (0.01, -0.02, 0.03)) for c, p in zip(cells, pts))

    def test_centers_map_back(self):
        cells = np.random.default_rng(1).integers(-1000, 1000, (500, 3))
        c = cell_centers(cells, 0.1, (-0.05, -0.05, -0.05))
        assert np.array_equal(world_to_cells(c, 0.1, (-0.05, -0.05, -0.05)), cells)


class TestProjection:
    def test_optical_axis(self):
        assert project_point((0, 0, 2.0), Pose.identity(), INTR) == (320.0, 240.0, 2.0)

    def test_behind_camera(self):
        assert project_point((0, 0, -1.0), Pose.identity(), INTR) is None
        assert project_point((1, 1, 0.0), Pose.identity(), INTR) is None

    def test_pinhole_arithmetic(self):
        u, v, d = project_point((0.5, 0, 2), Pose.identity(), INTR)
        assert u == pytest.approx(445.0, abs=1e-12) and v == 240.0 and d == 2.0

    def test_backproject_axis(self):
        assert np.allclose(backproject_pixel(320, 240, 3.0, Pose.identity(), INTR), [0, 0, 3.0])

    def test_backproject_example(self):
        assert np.allclose(backproject_pixel(445, 240, 2.0, Pose.identity(), INTR), [0.5, 0, 2], atol=1e-12)

    @pytest.mark.parametrize("d", [0.0, -1.0, np.nan])
    def test_backproject_rejects_bad_depth(self, d):
        with pytest.raises(ValueError):
            backproject_pixel(10, 10, d, Pose.identity(), INTR)

    @given(st.integers(0, 10_000), st.floats(-300, 900), st.floats(-200, 700), st.floats(0.05, 80))
    def test_project_inverts_backproject(self, seed, u, v, d):
        pose = random_pose(seed)
        p = backproject_pixel(u, v, d, pose, INTR)
        uu, vv, dd = project_point(p, pose, INTR)
        assert abs(uu - u) < 1e-9 and abs(vv - v) < 1e-9 and abs(dd - d) < 1e-9

    @given(st.integers(0, 10_000))
    def test_backproject_inverts_project(self, seed):
        pose = random_pose(seed)
        rng = np.random.default_rng(seed)
        pc = np.column_stack([rng.uniform(-2, 2, 50), rng.uniform(-2, 2, 50), rng.uniform(0.5, 20, 50)])
        world = pose.apply(pc)
        u, v, d, front = project_points(world, pose, INTR)
        assert front.all()
        assert np.allclose(backproject_pixels(u, v, d, pose, INTR), world, atol=1e-9)


class TestPose:
    def test_rejects_non_orthonormal(self):
        with pytest.raises(ValueError):
            Pose(np.diag([1.0, 1.0, 1.001]), np.zeros(3))

    def test_rejects_reflection(self):
        with pytest.raises(ValueError):
            Pose(np.diag([1.0, 1.0, -1.0]), np.zeros(3))

    def test_tolerance(self):
        R = Rotation.random(random_state=3).as_matrix()
        Pose(R + 1e-8, np.zeros(3))

    @given(st.integers(0, 1000), st.integers(0, 1000))
    def test_composition_stays_orthonormal(self, a, b):
        P = random_pose(a)
        for _ in range(20):
            P = P.compose(random_pose(b))
        R = P.rotation
        assert np.abs(R.T @ R - np.eye(3)).max() < 1e-9

    def test_inverse(self):
        P = random_pose(7)
        I = P.compose(P.inverse())
        assert np.allclose(I.rotation, np.eye(3)) and np.allclose(I.translation, 0)
        x = np.random.default_rng(0).normal(size=(5, 3))
        assert np.allclose(P.apply_inverse(P.apply(x)), x)

    def test_matrix_round_trip(self):
        P = random_pose(9)
        Q = Pose.from_matrix(P.matrix()[:3])
        assert np.array_equal(P.rotation, Q.rotation) and np.array_equal(P.translation, Q.translation)

    def test_immutable(self):
        P = Pose.identity()
        with pytest.raises(ValueError):
            P.rotation[0, 0] = 2.0


class TestIntrinsicsAndRaster:
    @pytest.mark.parametrize("args", [(0, 1, 1, 1, 4, 4), (1, 1, 4, 1, 4, 4), (1, 1, 1, 1, 0, 4), (1, 1, -1, 1, 4, 4)])
    def test_intrinsics_invariants(self, args):
        with pytest.raises(ValueError):
            CameraIntrinsics(*args)

    def test_depth_mask_from_values(self):
        r = Raster("depth", np.array([[1.0, 0.0], [np.nan, -2.0]]))
        assert r.mask.tolist() == [[True, False], [False, False]]

    def test_depth_mask_and_explicit(self):
        r = Raster("depth", np.array([[1.0, 2.0]]), mask=[[False, True]])
        assert r.mask.tolist() == [[False, True]]

    def test_bad_kind_and_shape(self):
        with pytest.raises(ValueError):
            Raster("rgb", np.zeros((2, 2)))
        with pytest.raises(ValueError):
            Raster("binary", np.zeros(4))
        with pytest.raises(ValueError):
            Raster("binary", np.zeros((2, 2)), mask=np.ones((2, 3)))

    def test_equality_ignores_masked_data(self):
        a = Raster("binary", np.array([[1, 0]]), [[True, False]])
        b = Raster("binary", np.array([[1, 1]]), [[True, False]])
        assert a == b

    def test_valid_pixels_stride(self):
        intr = CameraIntrinsics(10, 10, 2, 2, 5, 5)
        depth = Raster("depth", np.ones((5, 5)))
        rows, cols, pts = valid_pixels_to_points(depth, Pose.identity(), intr, stride=2)
        assert len(rows) == 9 and set(rows.tolist()) == {0, 2, 4}
        assert np.allclose(pts[:, 2], 1.0)
