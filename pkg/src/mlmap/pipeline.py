"""Dataset ingestion and the label -> map -> evaluate workflow.

Sequence directory layout (frame ``N`` uses the six-digit stem ``%06d``)::

    poses.txt                  one 3x4 world-from-sensor matrix per frame
    calib.txt                  fx fy cx cy width height
    clouds/N.xyz | N.bin       sensor-frame point cloud (required)
    depth/N.depth              depth raster (optional)
    semantic/N.pgm             class-index raster (optional)
    traversability/N.pgm       binary label raster used for mapping (optional)
    gt/N.pgm                   binary ground truth for evaluation (optional)
    scalars/N.txt              world-frame ``x y z value`` lines (optional)

The camera frame coincides with the sensor frame.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import RunConfig
from .gaussian import gaussian_moments, update_gaussian, update_traversability_threeway
from .geometry import CameraIntrinsics, Pose, Raster
from .grid import VoxelGrid, beta_grid, dirichlet_grid, gaussian_grid
from .io import (FormatError, read_calib, read_cloud, read_depth, read_map, read_pgm, read_poses, read_scalars,
                 write_calib, write_cloud, write_depth, write_map, write_pgm, write_poses, write_scalars)
from .kernel import build_index
from .labeling import build_elevation_map, project_labels_to_image, score_map, semantic_noise_filter
from .metrics import ConfusionMatrix, project_map_to_image_labels
from .semantic import dirichlet_moments, one_hot, update_semantic
from .traversability import beta_moments, update_traversability

log = logging.getLogger(__name__)


@dataclass
class ScanRecord:
    frame_id: int
    pose: Pose
    cloud: np.ndarray
    intrinsics: CameraIntrinsics | None = None
    depth: Raster | None = None
    semantic: Raster | None = None
    traversability: Raster | None = None
    ground_truth: Raster | None = None
    scalars: tuple[np.ndarray, np.ndarray] | None = None


def _frame_file(root: Path, sub: str, frame: int, exts) -> Path | None:
    for ext in exts:
        p = root / sub / f"{frame:06d}{ext}"
        if p.exists():
            return p
    return None


def load_dataset(root, cfg: RunConfig | None = None) -> list[ScanRecord]:
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"{root}: sequence directory does not exist")
    pose_file = root / "poses.txt"
    if not pose_file.exists():
        raise FileNotFoundError(f"no frames found in {root} (missing {pose_file.name})")
    poses = read_poses(pose_file)
    if not poses:
        raise FormatError(f"no frames found in {root} ({pose_file.name} is empty)")
    calib = root / "calib.txt"
    intr = read_calib(calib) if calib.exists() else None

    records = []
    for f, pose in enumerate(poses):
        cloud_path = _frame_file(root, "clouds", f, (".bin", ".xyz"))
        if cloud_path is None:
            raise FileNotFoundError(f"{root / 'clouds'}: missing point cloud for frame {f:06d}")
        rec = ScanRecord(f, pose, read_cloud(cloud_path), intr)
        for attr, sub, reader in (("depth", "depth", read_depth),
                                  ("semantic", "semantic", lambda p: read_pgm(p, "class")),
                                  ("traversability", "traversability", lambda p: read_pgm(p, "binary")),
                                  ("ground_truth", "gt", lambda p: read_pgm(p, "binary"))):
            path = _frame_file(root, sub, f, (".depth",) if sub == "depth" else (".pgm",))
            if path is None:
                continue
            if intr is None:
                raise FileNotFoundError(f"{calib}: required because {path} exists")
            raster = reader(path)
            if raster.shape != (intr.height, intr.width):
                raise FormatError(f"{path}: size {raster.width}x{raster.height} does not match calib.txt")
            setattr(rec, attr, raster)
        path = _frame_file(root, "scalars", f, (".txt",))
        if path is not None:
            rec.scalars = read_scalars(path)
        records.append(rec)
    return records


@dataclass
class MappingResult:
    semantic: VoxelGrid
    traversability: VoxelGrid
    friction: VoxelGrid | None
    frames: list[dict] = field(default_factory=list)

    def report(self) -> dict:
        """Deterministic summary (no timings)."""
        return {
            "frames": len(self.frames),
            "semantic_cells": len(self.semantic),
            "traversability_cells": len(self.traversability),
            "friction_cells": 0 if self.friction is None else len(self.friction),
            "semantic_points": sum(f["semantic_points"] for f in self.frames),
            "traversability_points": sum(f["traversability_points"] for f in self.frames),
            "scalar_points": sum(f["scalar_points"] for f in self.frames),
        }


def _pixel_points(rec: ScanRecord, stride: int, max_range: float):
    """Backprojected valid-depth pixels, tagged with their linear pixel index."""
    depth = rec.depth
    mask = depth.mask & (depth.data <= max_range)
    if stride > 1:
        keep = np.zeros_like(mask)
        keep[::stride, ::stride] = True
        mask &= keep
    rows, cols = np.nonzero(mask)
    intr = rec.intrinsics
    d = depth.data[rows, cols]
    pc = np.stack([(cols - intr.cx) * d / intr.fx, (rows - intr.cy) * d / intr.fy, d], axis=1)
    return rows, cols, rec.pose.apply(pc), rows * depth.width + cols


def run_mapping(records, cfg: RunConfig) -> MappingResult:
    """Fuse every frame in order: semantic, then friction, then traversability."""
    geo = cfg.map
    sem_cfg = cfg.semantic
    sem = dirichlet_grid(sem_cfg.num_classes, sem_cfg.prior, geo.resolution, geo.origin)
    trav = beta_grid(cfg.traversability.prior_alpha, cfg.traversability.prior_beta, geo.resolution, geo.origin)
    fric = None
    opts = cfg.mapping
    result = MappingResult(sem, trav, None)

    for scan, rec in enumerate(records):
        t0 = time.perf_counter()
        entry = {"frame": rec.frame_id, "semantic_points": 0, "traversability_points": 0, "scalar_points": 0}
        try:
            if rec.depth is not None and (rec.semantic is not None or rec.traversability is not None):
                rows, cols, pts, ids = _pixel_points(rec, opts.pixel_stride, opts.max_range)
                indexes: dict[bytes, object] = {}

                def subset(raster):
                    ok = raster.mask[rows, cols]
                    key = ok.tobytes()
                    if key not in indexes:
                        indexes[key] = build_index(pts[ok], ids[ok])
                    return ok, indexes[key]

                if rec.semantic is not None:
                    ok, idx = subset(rec.semantic)
                    labels = rec.semantic.data[rows[ok], cols[ok]]
                    update_semantic(sem, idx.points, one_hot(labels, sem_cfg.num_classes), cfg.kernel, idx)
                    entry["semantic_points"] = int(ok.sum())
            if rec.scalars is not None and len(rec.scalars[0]):
                if fric is None:
                    fric = result.friction = gaussian_grid(geo.resolution, geo.origin)
                update_gaussian(fric, rec.scalars[0], rec.scalars[1], cfg.kernel)
                entry["scalar_points"] = len(rec.scalars[0])
            if rec.depth is not None and rec.traversability is not None:
                ok, idx = subset(rec.traversability)
                z = rec.traversability.data[rows[ok], cols[ok]]
                sem_in = sem if cfg.traversability.semantic_fusion else None
                if opts.friction_fusion and fric is not None:
                    update_traversability_threeway(trav, sem_in, fric, cfg.gaussian, idx.points, z, cfg.kernel,
                                                   sem_cfg.traversable_classes, idx, seed=cfg.seed, scan_index=scan)
                else:
                    update_traversability(trav, sem_in, idx.points, z, cfg.kernel, sem_cfg.traversable_classes,
                                          idx, seed=cfg.seed, scan_index=scan)
                entry["traversability_points"] = int(ok.sum())
        except ValueError as exc:
            raise ValueError(f"frame {rec.frame_id:06d}: {exc}") from exc
        entry["seconds"] = time.perf_counter() - t0
        log.info("frame %06d: %d semantic, %d traversability, %d scalar points in %.3f s", rec.frame_id,
                 entry["semantic_points"], entry["traversability_points"], entry["scalar_points"], entry["seconds"])
        result.frames.append(entry)
    return result


def write_report(path, report: dict) -> None:
    with open(path, "w") as fh:
        for k, v in report.items():
            fh.write(f"{k}={v}\n")


def read_report(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if line.strip():
            k, _, v = line.partition("=")
            out[k] = v
    return out


def save_mapping(result: MappingResult, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_map(out / "semantic.mlmap", result.semantic)
    write_map(out / "traversability.mlmap", result.traversability)
    if result.friction is not None:
        write_map(out / "friction.mlmap", result.friction)
    write_report(out / "mapping.txt", result.report())
    with open(out / "timing.csv", "w") as fh:
        fh.write("frame,semantic_points,traversability_points,scalar_points,seconds\n")
        for f in result.frames:
            fh.write(f"{f['frame']},{f['semantic_points']},{f['traversability_points']},{f['scalar_points']},"
                     f"{f['seconds']:.6f}\n")


def evaluate(records, trav_grid: VoxelGrid, cfg: RunConfig) -> dict:
    """Pixel-wise IoU of the projected map (and of the input label rasters) against ``gt``."""
    mapped = ConfusionMatrix(2)
    raster = ConfusionMatrix(2)
    n = 0
    for rec in records:
        if rec.depth is None or rec.ground_truth is None:
            continue
        n += 1
        pred = project_map_to_image_labels(trav_grid, rec.depth, rec.pose, rec.intrinsics,
                                           cfg.mapping.eval_threshold, cfg.mapping.eval_use_map)
        mapped.update(pred, rec.ground_truth)
        if rec.traversability is not None:
            # Same pixel set as the mapped prediction.
            gt = Raster("binary", rec.ground_truth.data, rec.ground_truth.mask & pred.mask)
            raster.update(rec.traversability, gt)
    if n == 0:
        raise ValueError("no frames with both depth and ground truth to evaluate")
    iou, miou = mapped.iou()
    report = {"frames": n, "pixels": mapped.total, "iou_untraversable": iou[0], "iou_traversable": iou[1],
              "miou": miou}
    if raster.total:
        riou, rmiou = raster.iou()
        report.update({"raster_iou_untraversable": riou[0], "raster_iou_traversable": riou[1],
                       "raster_miou": rmiou})
    return report


def write_metrics(out_prefix, report: dict) -> None:
    """``<prefix>.txt`` as key=value lines and ``<prefix>.csv`` with a header row."""
    write_report(f"{out_prefix}.txt", {k: _fmt(v) for k, v in report.items()})
    with open(f"{out_prefix}.csv", "w") as fh:
        fh.write(",".join(report) + "\n")
        fh.write(",".join(_fmt(v) for v in report.values()) + "\n")


def _fmt(v) -> str:
    return f"{v:.10g}" if isinstance(v, float) else str(v)


def label_sequence(records, cfg: RunConfig) -> list[Raster | None]:
    """Geometric traversability labels per frame from the following ``window`` clouds."""
    lc = cfg.labeling
    out = []
    for k, rec in enumerate(records):
        if rec.depth is None:
            out.append(None)
            continue
        window = records[k : k + lc.window]
        emap = build_elevation_map([r.cloud for r in window], [r.pose for r in window], lc.resolution)
        labels = project_labels_to_image(score_map(emap, lc), rec.depth, rec.pose, rec.intrinsics, lc.threshold)
        if rec.semantic is not None and lc.untraversable_classes:
            labels = semantic_noise_filter(labels, rec.semantic, lc.untraversable_classes)
        out.append(labels)
    return out


def export_csv(grid: VoxelGrid, path, cfg: RunConfig | None = None) -> None:
    """``x y z value variance`` per cell center.

    value/variance: MAP class and its variance (semantic), posterior mean and
    variance (traversability), posterior mean and variance (friction).
    """
    centers = grid.centers()
    order = np.argsort(grid.keys, kind="stable")
    rows = grid.values[order]
    if grid.kind == "dirichlet":
        _, cls, var = dirichlet_moments(rows) if len(rows) else (None, np.empty(0), np.empty((0, grid.width)))
        value, variance = cls.astype(np.float64), var[np.arange(len(cls)), cls] if len(rows) else np.empty(0)
    elif grid.kind == "beta":
        _, value, variance = beta_moments(rows[:, 0], rows[:, 1])
    else:
        gcfg = (cfg or RunConfig()).gaussian
        value, variance = gaussian_moments(rows, gcfg) if len(rows) else (np.empty(0), np.empty(0))
    with open(path, "w") as fh:
        fh.write("x y z value variance\n")
        for (x, y, z), v, s in zip(centers[order], value, variance):
            fh.write(f"{x:.6f} {y:.6f} {z:.6f} {v:.10g} {s:.10g}\n")


def write_sequence(root, seq, cfg: RunConfig | None = None, scalars=None, cloud_format: str = ".bin") -> None:
    """Write a :class:`~mlmap.synth.SyntheticSequence` in the dataset layout."""
    root = Path(root)
    for sub in ("clouds", "depth", "semantic", "traversability", "gt", "scalars"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    write_poses(root / "poses.txt", seq.poses)
    write_calib(root / "calib.txt", seq.intrinsics)
    for f in range(len(seq)):
        stem = f"{f:06d}"
        write_cloud(root / "clouds" / f"{stem}{cloud_format}", seq.clouds[f])
        write_depth(root / "depth" / f"{stem}.depth", seq.depth[f])
        write_pgm(root / "semantic" / f"{stem}.pgm", seq.semantic[f])
        write_pgm(root / "traversability" / f"{stem}.pgm", seq.traversability[f])
        write_pgm(root / "gt" / f"{stem}.pgm", seq.traversability_gt[f])
        if scalars is not None:
            write_scalars(root / "scalars" / f"{stem}.txt", *scalars[f])
    if cfg is not None:
        from .config import format_config

        (root / "config.txt").write_text(format_config(cfg))


def load_map(path) -> VoxelGrid:
    return read_map(path)
