"""Ray-cast synthetic scenes: a corridor of flat ground between two walls with
low box obstacles, seen by a forward-moving pinhole camera.

Ground truth per pixel comes from the geometry; noisy semantic and
traversability rasters emulate network outputs at a requested accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import CameraIntrinsics, Pose, Raster, backproject_pixels

GROUND, WALL, OBSTACLE, SKY = 0, 1, 2, 3
NUM_CLASSES = 4
TRAVERSABLE_CLASSES = (GROUND,)
UNTRAVERSABLE_CLASSES = (WALL, OBSTACLE, SKY)

# Surfaces sit on multiples of 0.1 m; this origin puts them at voxel centers.
FIXTURE_ORIGIN = (-0.05, -0.05, -0.05)


@dataclass(frozen=True)
class Box:
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]
    label: int


@dataclass
class SyntheticWorld:
    boxes: list[Box]

    def raycast(self, origin, dirs, max_range: float = np.inf):
        """First hit along ``origin + t * dirs`` (t > 0) for each ray.

        Returns (t, label); misses get t = inf and the sky label.
        """
        o = np.asarray(origin, dtype=np.float64)
        D = np.asarray(dirs, dtype=np.float64)
        best = np.full(len(D), np.inf)
        label = np.full(len(D), SKY, dtype=np.int64)
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / D
            for b in self.boxes:
                t1 = (np.asarray(b.lo) - o) * inv
                t2 = (np.asarray(b.hi) - o) * inv
                tmin = np.nanmax(np.minimum(t1, t2), axis=1)
                tmax = np.nanmin(np.maximum(t1, t2), axis=1)
                hit = (tmax >= tmin) & (tmin > 1e-9) & (tmin < best)
                best[hit] = tmin[hit]
                label[hit] = b.label
        far = best > max_range
        best[far] = np.inf
        label[far] = SKY
        return best, label


def corridor_world(length: float = 30.0, half_width: float = 2.5, wall_height: float = 2.5,
                   obstacles=((3.0, 0.8), (5.5, -1.0), (8.0, 0.2), (10.5, -0.6), (13.0, 1.2), (15.5, -0.2)),
                   obstacle_size: float = 0.6, obstacle_height: float = 0.3) -> SyntheticWorld:
    boxes = [
        Box((-5.0, -half_width, -0.5), (length, half_width, 0.0), GROUND),
        Box((-5.0, half_width, -0.5), (length, half_width + 0.5, wall_height), WALL),
        Box((-5.0, -half_width - 0.5, -0.5), (length, -half_width, wall_height), WALL),
    ]
    s = obstacle_size / 2
    for x, y in obstacles:
        boxes.append(Box((x - s, y - s, 0.0), (x + s, y + s, obstacle_height), OBSTACLE))
    return SyntheticWorld(boxes)


def camera_rotation(yaw: float, pitch: float) -> np.ndarray:
    """World-from-camera rotation; camera axes x right, y down, z forward.

    At zero yaw and pitch the camera looks along world +x with world +z up.
    ``pitch`` > 0 tilts the view downward.
    """
    base = np.array([[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]])  # columns: cam x, y, z in world
    cp, sp = np.cos(pitch), np.sin(pitch)
    tilt = np.array([[1.0, 0.0, 0.0], [0.0, cp, sp], [0.0, -sp, cp]])  # about camera x
    cy, sy = np.cos(yaw), np.sin(yaw)
    turn = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])  # about world z
    return turn @ base @ tilt


def corridor_trajectory(n_frames: int, step: float = 0.3, height: float = 1.0, pitch: float = 0.35,
                        yaw_amplitude: float = 0.15) -> list[Pose]:
    poses = []
    for f in range(n_frames):
        yaw = yaw_amplitude * np.sin(0.7 * f)
        t = np.array([f * step, 0.3 * np.sin(0.3 * f), height])
        poses.append(Pose(camera_rotation(yaw, pitch), t))
    return poses


def render(world: SyntheticWorld, pose: Pose, intr: CameraIntrinsics, max_range: float = 15.0):
    """Exact depth (positive camera z), semantic ground truth and traversability ground truth."""
    u, v = intr.pixel_grid()
    d_cam = np.stack([(u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, np.ones_like(u)], axis=-1).reshape(-1, 3)
    t, label = world.raycast(pose.translation, d_cam @ pose.rotation.T, max_range)
    shape = (intr.height, intr.width)
    depth = Raster("depth", np.where(np.isfinite(t), t, np.nan).reshape(shape))
    sem = Raster("class", label.reshape(shape).astype(np.uint8))
    trav = np.isin(label, TRAVERSABLE_CLASSES).reshape(shape).astype(np.uint8)
    return depth, sem, Raster("binary", trav, depth.mask.copy())


def noisy_semantics(gt: Raster, accuracy: float, rng: np.random.Generator, num_classes: int = NUM_CLASSES) -> Raster:
    """Replace a (1 - accuracy) fraction of pixels with a different random class."""
    wrong = rng.random(gt.shape) >= accuracy
    shift = rng.integers(1, num_classes, size=gt.shape)
    data = np.where(wrong, (gt.data.astype(np.int64) + shift) % num_classes, gt.data).astype(np.uint8)
    return Raster("class", data, gt.mask.copy())


def noisy_traversability(gt: Raster, sem_gt: Raster, accuracy: float, rng: np.random.Generator,
                         block: int = 4, class_error_weight=(1.0, 1.0, 2.0, 1.0)) -> Raster:
    """Flip labels so that on average ``accuracy`` of valid pixels stay correct.

    Errors come in ``block`` x ``block`` patches and are more frequent on
    classes with a larger ``class_error_weight`` (by default obstacles), which
    mimics the spatially coherent, class-dependent mistakes of a segmentation
    network. Per-pixel error rates are capped at 0.5.
    """
    valid = gt.mask
    wt = np.asarray(class_error_weight, dtype=np.float64)[sem_gt.data.astype(np.int64)]
    mean_wt = wt[valid].mean() if valid.any() else 1.0
    p_err = np.minimum((1.0 - accuracy) * wt / mean_wt, 0.5)
    h, w = gt.shape
    coarse = rng.random((-(-h // block), -(-w // block)))
    u = np.kron(coarse, np.ones((block, block)))[:h, :w]
    flip = (u < p_err) & valid
    data = np.where(flip, 1 - gt.data, gt.data).astype(np.uint8)
    return Raster("binary", data, valid.copy())


@dataclass
class SyntheticSequence:
    intrinsics: CameraIntrinsics
    poses: list[Pose]
    depth: list[Raster] = field(default_factory=list)
    semantic_gt: list[Raster] = field(default_factory=list)
    traversability_gt: list[Raster] = field(default_factory=list)
    semantic: list[Raster] = field(default_factory=list)
    traversability: list[Raster] = field(default_factory=list)
    clouds: list[np.ndarray] = field(default_factory=list)

    def __len__(self):
        return len(self.poses)


def make_sequence(seed: int = 0, n_frames: int = 30, semantic_accuracy: float = 0.95,
                  traversability_accuracy: float = 0.75, intrinsics: CameraIntrinsics | None = None,
                  world: SyntheticWorld | None = None, max_range: float = 15.0) -> SyntheticSequence:
    """Render a corridor drive and corrupt the label rasters with a seeded RNG.

    Clouds are the sensor-frame backprojections of every valid depth pixel.
    """
    intr = intrinsics or CameraIntrinsics(40.0, 40.0, 31.5, 23.5, 64, 48)
    world = world or corridor_world()
    rng = np.random.default_rng(seed)
    seq = SyntheticSequence(intr, corridor_trajectory(n_frames))
    ident = Pose.identity()
    for pose in seq.poses:
        depth, sem, trav = render(world, pose, intr, max_range)
        seq.depth.append(depth)
        seq.semantic_gt.append(sem)
        seq.traversability_gt.append(trav)
        seq.semantic.append(noisy_semantics(sem, semantic_accuracy, rng))
        seq.traversability.append(noisy_traversability(trav, sem, traversability_accuracy, rng))
        rows, cols = np.nonzero(depth.mask)
        seq.clouds.append(backproject_pixels(cols, rows, depth.data[rows, cols], ident, intr))
    return seq


FRICTION_BY_CLASS = (0.8, 0.1, 0.2, 0.0)


def friction_scalars(seq: SyntheticSequence, rng: np.random.Generator, every: int = 8, noise: float = 0.05):
    """World-frame friction samples on every ``every``-th valid pixel of each frame."""
    out = []
    for f in range(len(seq)):
        depth, sem = seq.depth[f], seq.semantic_gt[f]
        rows, cols = np.nonzero(depth.mask)
        rows, cols = rows[::every], cols[::every]
        pts = backproject_pixels(cols, rows, depth.data[rows, cols], seq.poses[f], seq.intrinsics)
        base = np.asarray(FRICTION_BY_CLASS)[sem.data[rows, cols].astype(np.int64)]
        out.append((pts, np.clip(base + noise * rng.standard_normal(base.size), 0.0, 1.0)))
    return out


def fixture_config(seed: int = 0, pixel_stride: int = 2):
    """Run configuration matching the synthetic corridor's classes and voxel alignment."""
    from .config import MapGeometry, MappingOptions, RunConfig
    from .labeling import TraversabilityLabelConfig
    from .semantic import SemanticConfig

    return RunConfig(
        map=MapGeometry(0.1, FIXTURE_ORIGIN),
        semantic=SemanticConfig(NUM_CLASSES, 0.001, TRAVERSABLE_CLASSES),
        labeling=TraversabilityLabelConfig(untraversable_classes=(WALL, SKY)),
        mapping=MappingOptions(pixel_stride=pixel_stride, max_range=15.0),
        seed=seed,
    )
