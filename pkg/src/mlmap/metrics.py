"""Map-to-image projection for pixel-wise evaluation, IoU and the multi-task delta."""

from __future__ import annotations

import numpy as np

from .geometry import CameraIntrinsics, Pose, Raster, backproject_pixels
from .grid import VoxelGrid
from .labeling import INVALID_LABEL
from .traversability import traversability_estimate


def project_map_to_image_labels(grid: VoxelGrid, depth: Raster, pose: Pose, intr: CameraIntrinsics,
                                threshold: float = 0.5, use_map: bool = False) -> Raster:
    """Label each valid-depth pixel from the traversability voxel it lands in.

    Pixels without depth or landing in unmapped voxels are invalid.
    """
    if grid.kind != "beta":
        raise ValueError("expected a traversability (beta) grid")
    data = np.full(depth.shape, INVALID_LABEL, dtype=np.uint8)
    mask = np.zeros(depth.shape, dtype=bool)
    rows, cols = np.nonzero(depth.mask)
    if rows.size:
        pts = backproject_pixels(cols, rows, depth.data[rows, cols], pose, intr)
        vals, mapped = grid.values_at(pts)
        p = traversability_estimate(vals[mapped], use_map)
        r, c = rows[mapped], cols[mapped]
        data[r, c] = (p >= threshold).astype(np.uint8)
        mask[r, c] = True
    return Raster("binary", data, mask)


class ConfusionMatrix:
    """Accumulates gt-by-pred pixel counts over any number of image pairs."""

    def __init__(self, num_classes: int = 2):
        self.num_classes = num_classes
        self.counts = np.zeros((num_classes, num_classes), dtype=np.int64)
        self.ignored = 0

    def update(self, pred: Raster, gt: Raster) -> "ConfusionMatrix":
        if pred.shape != gt.shape:
            raise ValueError(f"prediction {pred.shape} and ground truth {gt.shape} differ in size")
        ok = pred.mask & gt.mask
        p = pred.data[ok].astype(np.int64)
        g = gt.data[ok].astype(np.int64)
        C = self.num_classes
        if p.size and (min(p.min(), g.min()) < 0 or max(p.max(), g.max()) >= C):
            raise ValueError(f"label outside [0, {C})")
        self.counts += np.bincount(g * C + p, minlength=C * C).reshape(C, C)
        self.ignored += int(ok.size - ok.sum())
        return self

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def iou(self):
        """Per-class IoU (NaN for classes absent from both) and their mean."""
        if self.total == 0:
            raise ValueError("no evaluable pixels")
        tp = np.diag(self.counts).astype(np.float64)
        union = self.counts.sum(axis=0) + self.counts.sum(axis=1) - tp
        with np.errstate(divide="ignore", invalid="ignore"):
            iou = np.where(union > 0, tp / union, np.nan)
        return iou, float(np.nanmean(iou))


def confusion_and_iou(pred: Raster, gt: Raster, num_classes: int = 2):
    return ConfusionMatrix(num_classes).update(pred, gt).iou()


def mtl_delta(mtl_scores, stl_scores) -> float:
    """Average signed relative gain of a multi-task model over single-task ones.

    Both arguments are sequences of ``(value, higher_is_better)``.
    """
    if len(mtl_scores) != len(stl_scores) or not mtl_scores:
        raise ValueError("need the same non-zero number of tasks on both sides")
    total = 0.0
    for (m, up_m), (s, up_s) in zip(mtl_scores, stl_scores):
        if up_m != up_s:
            raise ValueError("metric direction differs between the two sides")
        if s == 0:
            raise ValueError("single-task score must be non-zero")
        sign = 1.0 if up_m else -1.0
        total += sign * (m - s) / s
    return total / len(mtl_scores)
