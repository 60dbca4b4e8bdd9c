"""On-disk formats: poses, point clouds, rasters, calibration and map files.

All binary formats are little-endian.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .geometry import CameraIntrinsics, Pose, Raster
from .grid import FRAC_BITS, LAYER_KINDS, VoxelGrid
from .labeling import INVALID_LABEL


class FormatError(OSError):
    """A file exists but its contents are malformed or of an unsupported version."""


CLOUD_MAGIC = b"MLCLOUD1"
MAP_MAGIC = b"MLMAP"
MAP_VERSION = b"1"
_MAP_HEADER = struct.Struct("<BHd3dQB")


def read_poses(path) -> list[Pose]:
    """One world-from-sensor 3x4 matrix per line, 12 reals row-major."""
    path = Path(path)
    poses = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 12:
                raise FormatError(f"{path}:{lineno}: expected 12 numbers, got {len(parts)}")
            try:
                m = np.array([float(x) for x in parts]).reshape(3, 4)
                poses.append(Pose.from_matrix(m))
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
    return poses


def write_poses(path, poses) -> None:
    with open(path, "w") as fh:
        for p in poses:
            fh.write(" ".join(repr(float(x)) for x in p.matrix()[:3].ravel()) + "\n")


def read_cloud(path) -> np.ndarray:
    path = Path(path)
    if path.suffix == ".bin":
        raw = path.read_bytes()
        if len(raw) < 16 or raw[:8] != CLOUD_MAGIC:
            raise FormatError(f"{path}: not a binary point cloud")
        (n,) = struct.unpack("<Q", raw[8:16])
        if len(raw) != 16 + 12 * n:
            raise FormatError(f"{path}: header says {n} points but payload has {(len(raw) - 16) / 12}")
        return np.frombuffer(raw, dtype="<f4", offset=16).reshape(n, 3).astype(np.float64)
    pts = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 3:
                raise FormatError(f"{path}:{lineno}: expected 3 numbers, got {len(parts)}")
            try:
                pts.append([float(x) for x in parts])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: not a number") from None
    arr = np.array(pts, dtype=np.float64).reshape(-1, 3)
    if not np.all(np.isfinite(arr)):
        raise FormatError(f"{path}: non-finite coordinates")
    return arr


def write_cloud(path, points) -> None:
    path = Path(path)
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if path.suffix == ".bin":
        path.write_bytes(CLOUD_MAGIC + struct.pack("<Q", len(pts)) + pts.astype("<f4").tobytes())
    else:
        np.savetxt(path, pts, fmt="%.17g")


def write_pgm(path, raster: Raster) -> None:
    """8-bit binary PGM; invalid pixels are stored as 255."""
    data = np.where(raster.mask, raster.data, INVALID_LABEL).astype(np.uint8)
    h, w = data.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode() + data.tobytes())


def read_pgm(path, kind: str = "class") -> Raster:
    path = Path(path)
    raw = path.read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated PGM header")
        tokens.append(raw[start:pos])
    pos += 1
    if tokens[0] != b"P5":
        raise FormatError(f"{path}: only binary P5 PGM is supported")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise FormatError(f"{path}: malformed PGM header") from None
    if maxval != 255 or len(raw) - pos != w * h:
        raise FormatError(f"{path}: expected {w}x{h} 8-bit pixels")
    data = np.frombuffer(raw, dtype=np.uint8, offset=pos).reshape(h, w).copy()
    return Raster(kind, data, data != INVALID_LABEL)


def write_depth(path, raster: Raster) -> None:
    """``DEPTH width height`` header line, then float32 rows; invalid pixels are NaN."""
    data = np.where(raster.mask, raster.data, np.nan).astype("<f4")
    h, w = data.shape
    Path(path).write_bytes(f"DEPTH {w} {h}\n".encode() + data.tobytes())


def read_depth(path) -> Raster:
    path = Path(path)
    raw = path.read_bytes()
    nl = raw.find(b"\n")
    parts = raw[:nl].split() if nl >= 0 else []
    if len(parts) != 3 or parts[0] != b"DEPTH":
        raise FormatError(f"{path}: missing 'DEPTH width height' header")
    try:
        w, h = int(parts[1]), int(parts[2])
    except ValueError:
        raise FormatError(f"{path}: malformed depth header") from None
    if len(raw) - nl - 1 != 4 * w * h:
        raise FormatError(f"{path}: expected {w}x{h} float32 pixels")
    data = np.frombuffer(raw, dtype="<f4", offset=nl + 1).reshape(h, w).astype(np.float64)
    return Raster("depth", data)


def read_calib(path) -> CameraIntrinsics:
    """Single line ``fx fy cx cy width height``."""
    path = Path(path)
    parts = path.read_text().split()
    if len(parts) != 6:
        raise FormatError(f"{path}:1: expected 'fx fy cx cy width height'")
    try:
        fx, fy, cx, cy = (float(x) for x in parts[:4])
        return CameraIntrinsics(fx, fy, cx, cy, int(parts[4]), int(parts[5]))
    except ValueError as exc:
        raise FormatError(f"{path}:1: {exc}") from None


def write_calib(path, intr: CameraIntrinsics) -> None:
    Path(path).write_text(f"{intr.fx!r} {intr.fy!r} {intr.cx!r} {intr.cy!r} {intr.width} {intr.height}\n")


def read_scalars(path) -> tuple[np.ndarray, np.ndarray]:
    """Lines of ``x y z value`` in world coordinates."""
    path = Path(path)
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise FormatError(f"{path}:{lineno}: expected 'x y z value'")
            try:
                rows.append([float(x) for x in parts])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: not a number") from None
    arr = np.array(rows, dtype=np.float64).reshape(-1, 4)
    if not np.all(np.isfinite(arr)):
        raise FormatError(f"{path}: non-finite values")
    return arr[:, :3], arr[:, 3]


def write_scalars(path, points, values) -> None:
    np.savetxt(path, np.column_stack([points, values]), fmt="%.17g")


def _record_dtype(width: int) -> np.dtype:
    return np.dtype([("ijk", "<i4", (3,)), ("v", "<i8", (width,))])


def write_map(path, grid: VoxelGrid) -> None:
    """Versioned binary map.

    Layout: ``MLMAP`` + version byte, then (layer kind, row width, resolution,
    origin xyz, cell count, fixed-point fraction bits), the float64 prior row,
    and one (i, j, k, evidence...) record per cell with int32 indices and
    int64 evidence. Cells are written in key order, so equal grids give
    identical bytes.
    """
    order = np.argsort(grid.keys, kind="stable")
    rec = np.empty(len(grid), dtype=_record_dtype(grid.width))
    rec["ijk"] = grid.coords[order]
    rec["v"] = grid.evidence[order]
    header = MAP_MAGIC + MAP_VERSION + _MAP_HEADER.pack(
        LAYER_KINDS.index(grid.kind), grid.width, grid.resolution, *grid.origin, len(grid), FRAC_BITS)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(grid.prior.astype("<f8").tobytes())
        fh.write(rec.tobytes())


def read_map(path) -> VoxelGrid:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:5] != MAP_MAGIC or len(raw) < 6 + _MAP_HEADER.size:
        raise FormatError(f"{path}: not a map file")
    if raw[5:6] != MAP_VERSION:
        raise FormatError(f"{path}: unsupported map version {raw[5:6].decode(errors='replace')!r}")
    kind, width, res, ox, oy, oz, n, frac = _MAP_HEADER.unpack_from(raw, 6)
    if kind >= len(LAYER_KINDS) or width == 0 or not res > 0:
        raise FormatError(f"{path}: corrupt header")
    if frac != FRAC_BITS:
        raise FormatError(f"{path}: evidence stored with {frac} fraction bits, expected {FRAC_BITS}")
    pos = 6 + _MAP_HEADER.size
    dt = _record_dtype(width)
    if len(raw) != pos + 8 * width + n * dt.itemsize:
        raise FormatError(f"{path}: size does not match header ({n} cells)")
    prior = np.frombuffer(raw, dtype="<f8", count=width, offset=pos).astype(np.float64)
    rec = np.frombuffer(raw, dtype=dt, count=n, offset=pos + 8 * width)
    grid = VoxelGrid(LAYER_KINDS[kind], prior, res, (ox, oy, oz))
    grid.set_evidence(rec["ijk"].astype(np.int64), rec["v"])
    return grid


serialize_map = write_map
deserialize_map = read_map
