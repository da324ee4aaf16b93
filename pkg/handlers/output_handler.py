from schemas.models import (
    OBJECT_CLASSES,
    CameraIntrinsics,
    CameraPose,
    DepthMap,
    GridKind,
    LabelGrid,
    LgaGrid,
    LgaHistogram,
    MetricsReport,
    VoxelGrid,
)
from handlers.input_handler import DEPTH_HEADER, DEPTH_MAGIC, GRID_HEADER, GRID_MAGIC, PAYLOAD_DTYPES
from config.log_config import LoggingConfig

from pydantic import BaseModel
from pathlib import Path
from typing import Dict, Optional
import numpy as np

MAX_DEPTH_MM = np.iinfo(np.uint16).max


def grid_kind(grid: VoxelGrid) -> GridKind:
    """On-disk kind matching a grid's type and dtype."""
    if isinstance(grid, LabelGrid):
        return GridKind.LABELS
    if isinstance(grid, LgaGrid):
        return GridKind.LGA
    if grid.data.dtype == np.bool_:
        return GridKind.MASK
    return GridKind.SCALAR


def _number(value: Optional[float]) -> str:
    return "undefined" if value is None else f"{value:.12g}"


class OutputHandler:
    def __init__(self):
        self.console = LoggingConfig().console
        self.err_console = LoggingConfig().err_console

    # Writers
    def save_grid(self, grid: VoxelGrid, path: Path, kind: Optional[GridKind] = None):
        """Write a VXG1 grid file."""
        kind = grid_kind(grid) if kind is None else kind
        if grid.data.ndim != 3:
            raise ValueError(f"only scalar grids can be written, got data shape {grid.data.shape}")
        header = np.zeros(1, dtype=GRID_HEADER)
        header["magic"] = GRID_MAGIC
        header["kind"] = int(kind)
        header["dims"] = grid.geometry.dims
        header["voxel_size"] = grid.geometry.voxel_size
        header["origin"] = grid.geometry.origin
        payload = grid.flat().astype(PAYLOAD_DTYPES[kind])
        self._write(path, header.tobytes() + payload.tobytes())

    def save_depth(self, depth: DepthMap, path: Path):
        """Write a DPM1 depth raster, rounding meters to whole millimeters."""
        millimeters = np.rint(depth.depth * 1000.0)
        if millimeters.max(initial=0.0) > MAX_DEPTH_MM:
            raise ValueError(f"depth {float(depth.depth.max())} m exceeds the {MAX_DEPTH_MM / 1000.0} m range of the format")
        header = np.zeros(1, dtype=DEPTH_HEADER)
        header["magic"] = DEPTH_MAGIC
        header["width"] = depth.width
        header["height"] = depth.height
        self._write(path, header.tobytes() + millimeters.astype("<u2").tobytes())

    def save_camera(self, intrinsics: CameraIntrinsics, pose: CameraPose, path: Path):
        """Write a camera text file; repr keeps every float exact."""
        rows = [(intrinsics.fx, intrinsics.fy, intrinsics.cx, intrinsics.cy), *pose.rotation, pose.translation]
        text = "".join(" ".join(repr(float(v)) for v in row) + "\n" for row in rows)
        self._write(path, text.encode("utf-8"))

    def save_to_json(self, report: BaseModel, path: Path):
        """Save a report model to a JSON file"""
        self._write(path, (report.model_dump_json(indent=2) + "\n").encode("utf-8"))

    def _write(self, path: Path, content: bytes):
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(content)
        self.err_console.print(f"Wrote {path} ({len(content)} bytes)", style="system")

    # Reports
    def _line(self, text: str):
        self.console.print(text, style="report", markup=False, highlight=False, soft_wrap=True)

    def lga_stats(self, histogram: LgaHistogram, csv: bool = False):
        if csv:
            self._line("lga,count,fraction")
            for value, (count, fraction) in enumerate(zip(histogram.counts, histogram.fractions)):
                self._line(f"{value},{count},{fraction:.12g}")
            return
        self._line(f"defined_voxels: {sum(histogram.counts)}")
        for value, (count, fraction) in enumerate(zip(histogram.counts, histogram.fractions)):
            self._line(f"lga_{value}: count={count} fraction={fraction:.12g}")

    def losses(self, values: Dict[str, float]):
        for name, value in values.items():
            # adding 0.0 folds -0.0 into 0.0
            self._line(f"{name}: {value + 0.0:.12g}")

    def metrics(self, report: MetricsReport, scenes: int = 1):
        if scenes > 1:
            self._line(f"scenes: {scenes}")
        self._line(f"sc_precision: {_number(report.sc_precision)}")
        self._line(f"sc_recall: {_number(report.sc_recall)}")
        self._line(f"sc_iou: {_number(report.sc_iou)}")
        self._line(f"sc_counts: tp={report.sc_tp} fp={report.sc_fp} fn={report.sc_fn}")
        for label in OBJECT_CLASSES:
            c = int(label)
            self._line(
                f"iou_{label.short_name}: {_number(report.per_class_iou[c])} "
                f"tp={report.class_tp[c]} fp={report.class_fp[c]} fn={report.class_fn[c]}"
            )
        self._line(f"mean_iou: {_number(report.mean_iou)}")
        excluded = ", ".join(OBJECT_CLASSES[c - 1].short_name for c in report.excluded_classes)
        self._line(f"excluded_classes: {excluded or 'none'}")
