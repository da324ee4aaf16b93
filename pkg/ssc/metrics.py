"""Scene completion and semantic scene completion evaluation."""
from schemas.models import (
    NUM_LABELS,
    OBJECT_CLASSES,
    CameraIntrinsics,
    CameraPose,
    DepthMap,
    GridGeometry,
    MetricsReport,
    RoomBounds,
    ScMetrics,
    VoxelGrid,
    VoxelMask,
)
from ssc.camera import nearest_pixel, project
from ssc.grid import require_mask, require_same_geometry, voxel_centers, voxel_mask

from typing import Iterable, List, Optional
from typing_extensions import Self
import logging

import numpy as np

logger = logging.getLogger(__name__)


def build_eval_mask(depth: DepthMap, intr: CameraIntrinsics, pose: CameraPose, geometry: GridGeometry, room_bounds: RoomBounds) -> VoxelMask:
    """Voxels whose center is in front of the camera, inside the image and inside the room."""
    centers = voxel_centers(geometry)
    u, v, z = project(centers, intr, pose)
    _, _, in_view = nearest_pixel(u, v, z, depth.width, depth.height)
    mask = in_view & room_bounds.contains(centers)
    logger.debug("Evaluation mask keeps %d of %d voxels", int(mask.sum()), mask.size)
    return voxel_mask(geometry, mask)


def _ratio(numerator: int, denominator: int) -> Optional[float]:
    if denominator == 0:
        return None
    return numerator / denominator


class ConfusionCounts:
    """Label confusion matrix over masked voxels, rows = ground truth, columns = prediction."""

    def __init__(self, matrix: Optional[np.ndarray] = None):
        self.matrix = np.zeros((NUM_LABELS, NUM_LABELS), dtype=np.int64) if matrix is None else np.asarray(matrix, dtype=np.int64)

    @classmethod
    def from_grids(cls, pred: VoxelGrid, gt: VoxelGrid, mask: VoxelMask) -> Self:
        require_same_geometry(pred, gt, mask)
        require_mask(mask)
        keep = np.asarray(mask.data, dtype=bool)
        p = np.asarray(pred.data)[keep].astype(np.int64)
        g = np.asarray(gt.data)[keep].astype(np.int64)
        if p.size and (min(p.min(), g.min()) < 0 or max(p.max(), g.max()) >= NUM_LABELS):
            raise ValueError(f"labels must be in 0..{NUM_LABELS - 1}")
        matrix = np.bincount(g * NUM_LABELS + p, minlength=NUM_LABELS ** 2).reshape(NUM_LABELS, NUM_LABELS)
        return cls(matrix)

    def add(self, other: "ConfusionCounts") -> Self:
        self.matrix = self.matrix + other.matrix
        return self

    @property
    def tp(self) -> np.ndarray:
        return np.diag(self.matrix)

    @property
    def fp(self) -> np.ndarray:
        return self.matrix.sum(axis=0) - self.tp

    @property
    def fn(self) -> np.ndarray:
        return self.matrix.sum(axis=1) - self.tp

    def sc(self) -> ScMetrics:
        """Occupied (label != 0) versus empty."""
        tp = int(self.matrix[1:, 1:].sum())
        fp = int(self.matrix[0, 1:].sum())
        fn = int(self.matrix[1:, 0].sum())
        return ScMetrics(
            precision=_ratio(tp, tp + fp),
            recall=_ratio(tp, tp + fn),
            iou=_ratio(tp, tp + fp + fn),
            tp=tp,
            fp=fp,
            fn=fn,
        )

    def report(self) -> MetricsReport:
        sc = self.sc()
        tp, fp, fn = self.tp, self.fp, self.fn
        per_class = {int(c): _ratio(int(tp[c]), int(tp[c] + fp[c] + fn[c])) for c in OBJECT_CLASSES}
        defined = [iou for iou in per_class.values() if iou is not None]
        return MetricsReport(
            sc_precision=sc.precision,
            sc_recall=sc.recall,
            sc_iou=sc.iou,
            sc_tp=sc.tp,
            sc_fp=sc.fp,
            sc_fn=sc.fn,
            per_class_iou=per_class,
            class_tp={int(c): int(tp[c]) for c in OBJECT_CLASSES},
            class_fp={int(c): int(fp[c]) for c in OBJECT_CLASSES},
            class_fn={int(c): int(fn[c]) for c in OBJECT_CLASSES},
            mean_iou=sum(defined) / len(defined) if defined else None,
            excluded_classes=tuple(c for c, iou in per_class.items() if iou is None),
        )


def sc_metrics(pred_labels: VoxelGrid, gt_labels: VoxelGrid, mask: VoxelMask) -> ScMetrics:
    """Binary occupancy precision, recall and IoU over masked voxels."""
    return ConfusionCounts.from_grids(pred_labels, gt_labels, mask).sc()


def ssc_metrics(pred_labels: VoxelGrid, gt_labels: VoxelGrid, mask: VoxelMask) -> MetricsReport:
    """Per-class IoU for the 11 object classes, their mean, and the SC metrics."""
    return ConfusionCounts.from_grids(pred_labels, gt_labels, mask).report()


def aggregate(scenes: Iterable[ConfusionCounts], micro: bool = True) -> MetricsReport:
    """Dataset-level metrics.

    micro sums the counts of every scene and computes each ratio once. macro
    averages per-scene values over the scenes where they are defined; counts
    are always the summed counts.
    """
    scenes = list(scenes)
    if not scenes:
        raise ValueError("no scenes to aggregate")
    total = ConfusionCounts()
    for scene in scenes:
        total.add(scene)
    pooled = total.report()
    if micro:
        return pooled

    reports = [scene.report() for scene in scenes]

    def mean_of(values: List[Optional[float]]) -> Optional[float]:
        defined = [v for v in values if v is not None]
        return sum(defined) / len(defined) if defined else None

    per_class = {c: mean_of([r.per_class_iou[c] for r in reports]) for c in pooled.per_class_iou}
    defined = [iou for iou in per_class.values() if iou is not None]
    return pooled.model_copy(update={
        "sc_precision": mean_of([r.sc_precision for r in reports]),
        "sc_recall": mean_of([r.sc_recall for r in reports]),
        "sc_iou": mean_of([r.sc_iou for r in reports]),
        "per_class_iou": per_class,
        "mean_iou": sum(defined) / len(defined) if defined else None,
        "excluded_classes": tuple(c for c, iou in per_class.items() if iou is None),
    })
