"""Rigid poses, pinhole cameras, voxel addressing and raster containers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ORTHO_TOL = 1e-6

RASTER_KINDS = ("class", "binary", "depth", "score")


def as_point(x) -> np.ndarray:
    p = np.asarray(x, dtype=np.float64)
    if p.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError(f"non-finite coordinate in {p}")
    return p


def as_points(x) -> np.ndarray:
    """Validate an (N, 3) array of finite coordinates."""
    p = np.asarray(x, dtype=np.float64)
    if p.ndim == 1 and p.size == 0:
        p = p.reshape(0, 3)
    if p.ndim != 2 or p.shape[1] != 3:
        raise ValueError(f"expected an (N, 3) array, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError("non-finite point coordinates")
    return p


@dataclass(frozen=True)
class Pose:
    """World-from-frame rigid transform."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.array(self.rotation, dtype=np.float64)
        t = np.array(self.translation, dtype=np.float64).reshape(-1)
        if R.shape != (3, 3) or t.shape != (3,):
            raise ValueError("rotation must be 3x3 and translation a 3-vector")
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
            raise ValueError("pose contains non-finite values")
        if np.abs(R.T @ R - np.eye(3)).max() > ORTHO_TOL or abs(np.linalg.det(R) - 1.0) > ORTHO_TOL:
            raise ValueError("rotation is not a proper orthonormal matrix")
        R.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, m) -> "Pose":
        """Build from a 3x4 or 4x4 homogeneous matrix."""
        m = np.asarray(m, dtype=np.float64)
        if m.shape not in ((3, 4), (4, 4)):
            raise ValueError(f"expected 3x4 or 4x4 matrix, got {m.shape}")
        return cls(m[:3, :3], m[:3, 3])

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def compose(self, other: "Pose") -> "Pose":
        """self ∘ other, i.e. apply ``other`` first."""
        return Pose(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    def inverse(self) -> "Pose":
        Rt = self.rotation.T
        return Pose(Rt, -Rt @ self.translation)

    def apply(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation

    def apply_inverse(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        return (p - self.translation) @ self.rotation


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image size must be positive")
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point outside the image")

    def pixel_grid(self) -> tuple[np.ndarray, np.ndarray]:
        """Pixel-center coordinates (u, v), each shaped (height, width)."""
        v, u = np.mgrid[0 : self.height, 0 : self.width]
        return u.astype(np.float64), v.astype(np.float64)


def world_to_cell(x, resolution: float, origin=(0.0, 0.0, 0.0)) -> tuple[int, int, int]:
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    idx = np.floor((as_point(x) - as_point(origin)) / resolution).astype(np.int64)
    return int(idx[0]), int(idx[1]), int(idx[2])


def world_to_cells(points, resolution: float, origin=(0.0, 0.0, 0.0)) -> np.ndarray:
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    p = as_points(points)
    return np.floor((p - as_point(origin)) / resolution).astype(np.int64)


def cell_centers(cells, resolution: float, origin=(0.0, 0.0, 0.0)) -> np.ndarray:
    c = np.asarray(cells, dtype=np.float64).reshape(-1, 3)
    return np.asarray(origin, dtype=np.float64) + (c + 0.5) * resolution


def project_point(p, camera_pose: Pose, intr: CameraIntrinsics):
    """Pinhole projection; returns ``(u, v, depth)`` or ``None`` behind the camera."""
    X, Y, Z = camera_pose.apply_inverse(as_point(p))
    if Z <= 0:
        return None
    return intr.fx * X / Z + intr.cx, intr.fy * Y / Z + intr.cy, float(Z)


def project_points(points, camera_pose: Pose, intr: CameraIntrinsics):
    """Vectorized :func:`project_point`; ``in_front`` masks out points with Z <= 0."""
    pc = camera_pose.apply_inverse(as_points(points))
    Z = pc[:, 2]
    in_front = Z > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(in_front, intr.fx * pc[:, 0] / Z + intr.cx, np.nan)
        v = np.where(in_front, intr.fy * pc[:, 1] / Z + intr.cy, np.nan)
    return u, v, Z, in_front


def backproject_pixel(u: float, v: float, depth: float, camera_pose: Pose, intr: CameraIntrinsics) -> np.ndarray:
    if not (np.isfinite(depth) and depth > 0):
        raise ValueError(f"depth must be positive and finite, got {depth}")
    pc = np.array([(u - intr.cx) * depth / intr.fx, (v - intr.cy) * depth / intr.fy, depth])
    return camera_pose.apply(pc)


def backproject_pixels(u, v, depth, camera_pose: Pose, intr: CameraIntrinsics) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    d = np.asarray(depth, dtype=np.float64).ravel()
    if not np.all(np.isfinite(d) & (d > 0)):
        raise ValueError("all depths must be positive and finite")
    pc = np.stack([(u - intr.cx) * d / intr.fx, (v - intr.cy) * d / intr.fy, d], axis=1)
    return camera_pose.apply(pc)


@dataclass
class Raster:
    """Single-channel image with an explicit validity mask.

    ``data`` is indexed ``[row, col]`` (row-major). Depth rasters derive their
    mask from the data when none is given: only positive finite depths are valid.
    """

    kind: str
    data: np.ndarray
    mask: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.kind not in RASTER_KINDS:
            raise ValueError(f"unknown raster kind {self.kind!r}")
        self.data = np.asarray(self.data)
        if self.data.ndim != 2 or self.data.size == 0:
            raise ValueError("raster data must be a non-empty 2D array")
        if self.kind == "depth":
            self.data = self.data.astype(np.float64)
            ok = np.isfinite(self.data) & (self.data > 0)
            self.mask = ok if self.mask is None else (np.asarray(self.mask, dtype=bool) & ok)
        elif self.mask is None:
            self.mask = np.ones(self.data.shape, dtype=bool)
        else:
            self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.shape != self.data.shape:
            raise ValueError("mask shape does not match data")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def __eq__(self, other):
        if not isinstance(other, Raster):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.shape == other.shape
            and np.array_equal(self.mask, other.mask)
            and np.array_equal(np.where(self.mask, self.data, 0), np.where(other.mask, other.data, 0))
        )


def valid_pixels_to_points(depth: Raster, camera_pose: Pose, intr: CameraIntrinsics, stride: int = 1):
    """Backproject every valid depth pixel (optionally subsampled on a grid).

    Returns ``(rows, cols, points)``.
    """
    if depth.kind != "depth":
        raise ValueError("expected a depth raster")
    if depth.shape != (intr.height, intr.width):
        raise ValueError("depth raster does not match camera size")
    mask = depth.mask
    if stride > 1:
        sub = np.zeros_like(mask)
        sub[::stride, ::stride] = True
        mask = mask & sub
    rows, cols = np.nonzero(mask)
    pts = backproject_pixels(cols, rows, depth.data[rows, cols], camera_pose, intr)
    return rows, cols, pts
