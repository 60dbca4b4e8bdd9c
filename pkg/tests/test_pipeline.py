import numpy as np
import pytest

from mlmap.config import MappingOptions, TraversabilityConfig
from mlmap.geometry import CameraIntrinsics, Raster
from mlmap.io import FormatError, read_map
from mlmap.pipeline import (evaluate, export_csv, label_sequence, load_dataset, read_report, run_mapping,
                            save_mapping, write_metrics, write_sequence)
from mlmap.synth import fixture_config, friction_scalars, make_sequence

SMALL = CameraIntrinsics(20.0, 20.0, 15.5, 11.5, 32, 24)


@pytest.fixture(scope="module")
def small_seq():
    return make_sequence(3, 6, intrinsics=SMALL)


@pytest.fixture(scope="module")
def small_dir(tmp_path_factory, small_seq):
    root = tmp_path_factory.mktemp("seq")
    write_sequence(root, small_seq, fixture_config(0, 1), friction_scalars(small_seq, np.random.default_rng(0)))
    return root


class TestLoad:
    def test_fixture(self, fixture_dir):
        recs = load_dataset(fixture_dir)
        assert len(recs) == 3
        for r in recs:
            assert r.cloud.shape[1] == 3 and len(r.cloud) > 0
            for f in ("depth", "semantic", "traversability", "ground_truth", "scalars", "intrinsics"):
                assert getattr(r, f) is not None
            assert r.depth.shape == (24, 32)

    def test_empty_directory(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="no frames found"):
            load_dataset(tmp_path)

    def test_empty_poses(self, tmp_path):
        (tmp_path / "poses.txt").write_text("")
        with pytest.raises(FormatError, match="no frames found"):
            load_dataset(tmp_path)

    def test_missing_cloud(self, tmp_path):
        (tmp_path / "poses.txt").write_text("1 0 0 0 0 1 0 0 0 0 1 0\n")
        with pytest.raises(FileNotFoundError, match="000000"):
            load_dataset(tmp_path)

    def test_size_mismatch(self, tmp_path, small_seq):
        write_sequence(tmp_path, small_seq)
        (tmp_path / "calib.txt").write_text("20 20 15.5 11.5 30 24\n")
        with pytest.raises(FormatError, match="does not match"):
            load_dataset(tmp_path)

    def test_round_trip_through_disk(self, small_dir, small_seq):
        recs = load_dataset(small_dir)
        assert len(recs) == len(small_seq)
        assert np.array_equal(recs[2].semantic.data, small_seq.semantic[2].data)
        assert np.allclose(recs[2].cloud, small_seq.clouds[2], atol=1e-5)


class TestMapping:
    def test_no_measurements(self, small_dir):
        recs = load_dataset(small_dir)
        for r in recs:
            r.depth = r.semantic = r.traversability = None
            r.scalars = None
        res = run_mapping(recs, fixture_config())
        assert len(res.semantic) == 0 and len(res.traversability) == 0 and res.friction is None
        assert res.report()["frames"] == len(recs)

    def test_deterministic(self, small_dir):
        cfg = fixture_config(5)
        a = run_mapping(load_dataset(small_dir), cfg)
        b = run_mapping(load_dataset(small_dir), cfg)
        assert a.semantic == b.semantic and a.traversability == b.traversability and a.friction == b.friction

    def test_seed_only_moves_pseudo_measurement_mass(self, small_dir):
        recs = load_dataset(small_dir)
        a = run_mapping(recs, fixture_config(0))
        b = run_mapping(recs, fixture_config(1))
        assert a.semantic == b.semantic and a.friction == b.friction
        assert a.traversability != b.traversability
        ta, tb = a.traversability, b.traversability
        assert np.array_equal(np.sort(ta.keys), np.sort(tb.keys))
        # alpha + beta gains 2k per point whatever y' is drawn
        ea = ta.evidence[np.argsort(ta.keys)].sum(1)
        eb = tb.evidence[np.argsort(tb.keys)].sum(1)
        assert np.array_equal(ea, eb)

    def test_baseline_ignores_seed(self, small_dir):
        recs = load_dataset(small_dir)
        base = fixture_config(0)
        cfg = base.replace(traversability=TraversabilityConfig(semantic_fusion=False))
        a = run_mapping(recs, cfg)
        b = run_mapping(recs, cfg.replace(seed=9))
        assert a.traversability == b.traversability

    def test_friction_fusion_path(self, small_dir):
        recs = load_dataset(small_dir)
        base = fixture_config(0, 1)
        fused = run_mapping(recs, base.replace(mapping=MappingOptions(1, 15.0, friction_fusion=True)))
        plain = run_mapping(recs, base)
        assert fused.friction is not None and len(fused.friction) > 0
        # three sources put 3k per point where two put 2k
        f, p = fused.traversability, plain.traversability
        ef = f.evidence[np.argsort(f.keys)].sum(1)
        ep = p.evidence[np.argsort(p.keys)].sum(1)
        assert np.array_equal(2 * ef, 3 * ep)

    def test_bad_frame_named(self, small_dir):
        recs = load_dataset(small_dir)
        recs[1].semantic = Raster("class", np.full((24, 32), 30, dtype=np.uint8), np.ones((24, 32), bool))
        with pytest.raises(ValueError, match="frame 000001"):
            run_mapping(recs, fixture_config())

    def test_stride_reduces_points(self, small_dir):
        recs = load_dataset(small_dir)
        one = run_mapping(recs, fixture_config(0, 1)).report()
        two = run_mapping(recs, fixture_config(0, 2)).report()
        assert 3.5 < one["semantic_points"] / two["semantic_points"] < 4.5

    def test_save_outputs(self, small_dir, tmp_path):
        res = run_mapping(load_dataset(small_dir), fixture_config())
        save_mapping(res, tmp_path / "out")
        for name in ("semantic.mlmap", "traversability.mlmap", "friction.mlmap", "mapping.txt", "timing.csv"):
            assert (tmp_path / "out" / name).exists()
        assert read_map(tmp_path / "out" / "traversability.mlmap") == res.traversability
        assert read_report(tmp_path / "out" / "mapping.txt")["frames"] == str(len(res.frames))


class TestEvaluate:
    def test_mapped_and_raster(self, small_dir, tmp_path):
        recs = load_dataset(small_dir)
        cfg = fixture_config(0, 1)
        rep = evaluate(recs, run_mapping(recs, cfg).traversability, cfg)
        assert rep["frames"] == len(recs) and rep["pixels"] > 0
        assert 0 <= rep["miou"] <= 1 and 0 <= rep["raster_miou"] <= 1
        write_metrics(tmp_path / "m", rep)
        header, row = (tmp_path / "m.csv").read_text().splitlines()
        assert header.split(",")[0] == "frames" and len(row.split(",")) == len(rep)

    def test_nothing_to_evaluate(self, small_dir):
        recs = load_dataset(small_dir)
        for r in recs:
            r.ground_truth = None
        with pytest.raises(ValueError):
            evaluate(recs, run_mapping(recs[:1], fixture_config()).traversability, fixture_config())


class TestLabelAndExport:
    def test_geometric_labels_track_ground_truth(self, small_dir):
        recs = load_dataset(small_dir)
        labels = label_sequence(recs, fixture_config())
        agree = total = 0
        for lab, r in zip(labels, recs):
            ok = lab.mask & r.ground_truth.mask
            agree += int((lab.data[ok] == r.ground_truth.data[ok]).sum())
            total += int(ok.sum())
        assert total > 0 and agree / total > 0.8

    @pytest.mark.parametrize("layer", ["semantic", "traversability", "friction"])
    def test_export(self, small_dir, tmp_path, layer):
        res = run_mapping(load_dataset(small_dir), fixture_config())
        grid = getattr(res, layer)
        export_csv(grid, tmp_path / "m.csv")
        lines = (tmp_path / "m.csv").read_text().splitlines()
        assert lines[0] == "x y z value variance" and len(lines) == len(grid) + 1
        vals = np.loadtxt(tmp_path / "m.csv", skiprows=1)
        assert np.all(vals[:, 4] >= 0)
