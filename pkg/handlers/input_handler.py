from abc import ABC, abstractmethod
from pathlib import Path
from typing import Dict, Tuple
from config.log_config import LoggingConfig
from schemas.models import (
    CameraIntrinsics,
    CameraPose,
    DepthMap,
    GridFile,
    GridGeometry,
    GridKind,
    LabelGrid,
    LgaGrid,
    MaskGrid,
    VoxelGrid,
)
from pydantic import ValidationError
import numpy as np

console = LoggingConfig().err_console

GRID_MAGIC = b"VXG1"
DEPTH_MAGIC = b"DPM1"

GRID_HEADER = np.dtype([
    ("magic", "S4"),
    ("kind", "u1"),
    ("dims", "<u4", (3,)),
    ("voxel_size", "<f4"),
    ("origin", "<f4", (3,)),
])
DEPTH_HEADER = np.dtype([
    ("magic", "S4"),
    ("width", "<u4"),
    ("height", "<u4"),
])
PAYLOAD_DTYPES = {
    GridKind.LABELS: np.dtype("u1"),
    GridKind.SCALAR: np.dtype("<f4"),
    GridKind.LGA: np.dtype("u1"),
    GridKind.MASK: np.dtype("u1"),
}
_OFFSET_KIND = GRID_HEADER.fields["kind"][1]
_OFFSET_DIMS = GRID_HEADER.fields["dims"][1]
_OFFSET_VOXEL_SIZE = GRID_HEADER.fields["voxel_size"][1]


class FormatError(ValueError):
    """Corrupt or unsupported input file."""
    def __init__(self, path: Path, offset: int, message: str):
        self.path = path
        self.offset = offset
        super().__init__(f"{path}: {message} (byte offset {offset})")


class UsageError(ValueError):
    """Input of the wrong type or kind for the requested command."""


def shortest_float(value: np.float32) -> float:
    """The float64 with the shortest decimal form that rounds back to the same float32."""
    return float(str(np.float32(value)))


class BaseHandler(ABC):
    """Abstract base class for input handlers."""
    def __init__(self):
        self.console = console

    def read(self, source: Path):
        if not source.exists():
            raise FileNotFoundError(f"Input file does not exist: {source}")
        if not source.is_file():
            raise IsADirectoryError(f"Input is not a file: {source}")
        self.console.print(f"Reading {source}", style="system")
        return self.extract_content(source)

    @abstractmethod
    def extract_content(self, source: Path):
        pass


class GridHandler(BaseHandler):
    """Handler for VXG1 voxel grid files."""
    def extract_content(self, source: Path) -> GridFile:
        raw = source.read_bytes()
        if len(raw) < GRID_HEADER.itemsize:
            raise FormatError(source, len(raw), f"truncated header: expected {GRID_HEADER.itemsize} bytes, got {len(raw)}")
        header = np.frombuffer(raw, dtype=GRID_HEADER, count=1)[0]
        if header["magic"] != GRID_MAGIC:
            raise FormatError(source, 0, f"bad magic {bytes(header['magic'])!r}, expected {GRID_MAGIC!r}")
        try:
            kind = GridKind(int(header["kind"]))
        except ValueError:
            raise FormatError(source, _OFFSET_KIND, f"unknown dtype code {int(header['kind'])}") from None
        dims = tuple(int(d) for d in header["dims"])
        if min(dims) == 0:
            raise FormatError(source, _OFFSET_DIMS, f"dims {dims} must be positive")
        voxel_size = shortest_float(header["voxel_size"])
        if not voxel_size > 0:
            raise FormatError(source, _OFFSET_VOXEL_SIZE, f"voxel size {voxel_size} must be positive")
        geometry = GridGeometry(
            dims=dims,
            voxel_size=voxel_size,
            origin=tuple(shortest_float(o) for o in header["origin"]),
        )

        dtype = PAYLOAD_DTYPES[kind]
        expected = geometry.num_voxels * dtype.itemsize
        payload = raw[GRID_HEADER.itemsize:]
        if len(payload) != expected:
            raise FormatError(
                source, GRID_HEADER.itemsize + min(len(payload), expected),
                f"payload length mismatch: expected {expected} bytes, got {len(payload)}",
            )
        values = np.frombuffer(payload, dtype=dtype)
        return GridFile(kind=kind, grid=self._build(source, kind, geometry, values))

    def _build(self, source: Path, kind: GridKind, geometry: GridGeometry, values: np.ndarray) -> VoxelGrid:
        bad = None
        if kind == GridKind.LABELS:
            bad = np.flatnonzero(values > 11)
        elif kind == GridKind.LGA:
            bad = np.flatnonzero((values > 6) & (values != 255))
        elif kind == GridKind.MASK:
            bad = np.flatnonzero(values > 1)
        elif not np.isfinite(values).all():
            bad = np.flatnonzero(~np.isfinite(values))
        if bad is not None and bad.size:
            offset = GRID_HEADER.itemsize + int(bad[0]) * values.itemsize
            raise FormatError(source, offset, f"invalid {kind.name.lower()} value {values[bad[0]]}")

        if kind == GridKind.LABELS:
            return LabelGrid(geometry=geometry, data=values)
        if kind == GridKind.LGA:
            return LgaGrid(geometry=geometry, data=values)
        if kind == GridKind.MASK:
            return MaskGrid(geometry=geometry, data=values.astype(bool))
        return VoxelGrid(geometry=geometry, data=values.astype(np.float32))


class DepthHandler(BaseHandler):
    """Handler for DPM1 depth rasters (u16 millimeters, 0 = invalid)."""
    def extract_content(self, source: Path) -> DepthMap:
        raw = source.read_bytes()
        if len(raw) < DEPTH_HEADER.itemsize:
            raise FormatError(source, len(raw), f"truncated header: expected {DEPTH_HEADER.itemsize} bytes, got {len(raw)}")
        header = np.frombuffer(raw, dtype=DEPTH_HEADER, count=1)[0]
        if header["magic"] != DEPTH_MAGIC:
            raise FormatError(source, 0, f"bad magic {bytes(header['magic'])!r}, expected {DEPTH_MAGIC!r}")
        width, height = int(header["width"]), int(header["height"])
        if width == 0 or height == 0:
            raise FormatError(source, 4, f"image size {width}x{height} must be positive")
        expected = width * height * 2
        payload = raw[DEPTH_HEADER.itemsize:]
        if len(payload) != expected:
            raise FormatError(
                source, DEPTH_HEADER.itemsize + min(len(payload), expected),
                f"payload length mismatch: expected {expected} bytes, got {len(payload)}",
            )
        millimeters = np.frombuffer(payload, dtype="<u2")
        return DepthMap(width=width, height=height, depth=millimeters / 1000.0)


class CameraHandler(BaseHandler):
    """Handler for plain-text camera files: 'fx fy cx cy', three rotation rows, translation."""
    def extract_content(self, source: Path) -> Tuple[CameraIntrinsics, CameraPose]:
        rows = []
        offset = 0
        for number, line in enumerate(source.read_bytes().splitlines(keepends=True), start=1):
            text = line.decode("utf-8", errors="replace").strip()
            if text and not text.startswith("#"):
                try:
                    rows.append((offset, [float(v) for v in text.split()]))
                except ValueError:
                    raise FormatError(source, offset, f"line {number}: cannot parse numbers from {text!r}") from None
            offset += len(line)
        if len(rows) != 5:
            raise FormatError(source, offset, f"expected 5 data lines, found {len(rows)}")
        for i, (row_offset, values) in enumerate(rows):
            if len(values) != (4 if i == 0 else 3):
                raise FormatError(source, row_offset, f"data line {i + 1} has {len(values)} values")

        try:
            intrinsics = CameraIntrinsics(fx=rows[0][1][0], fy=rows[0][1][1], cx=rows[0][1][2], cy=rows[0][1][3])
        except ValidationError as e:
            raise FormatError(source, rows[0][0], f"invalid intrinsics: {e.errors()[0]['msg']}") from None
        try:
            pose = CameraPose(rotation=tuple(tuple(r[1]) for r in rows[1:4]), translation=tuple(rows[4][1]))
        except ValidationError as e:
            raise FormatError(source, rows[1][0], f"invalid pose: {e.errors()[0]['msg']}") from None
        return intrinsics, pose


class ArrayHandler(BaseHandler):
    """Handler for .npy prediction arrays."""
    def extract_content(self, source: Path) -> np.ndarray:
        try:
            return np.load(source, allow_pickle=False)
        except ValueError as e:
            raise FormatError(source, 0, f"not a readable .npy array: {e}") from None


class InputHandler:
    """Input handler for the different file types."""
    def __init__(self):
        self.handlers: Dict[str, BaseHandler] = {
            '.vxg': GridHandler(),
            '.dpm': DepthHandler(),
            '.cam': CameraHandler(),
            '.txt': CameraHandler(),
            '.npy': ArrayHandler(),
        }

    def extract(self, source: Path):
        """Extract content from the given source Path."""
        handler = self.handlers.get(source.suffix.lower())
        if not handler:
            raise UsageError(f"No handler available for source type: {source.suffix}")
        return handler.read(source)

    def _typed(self, source: Path, handler_type: type, what: str) -> BaseHandler:
        handler = self.handlers.get(source.suffix.lower())
        if not isinstance(handler, handler_type):
            raise UsageError(f"{source}: expected a {what} file, got suffix '{source.suffix}'")
        return handler

    def depth(self, source: Path) -> DepthMap:
        """Read a DPM1 depth raster."""
        return self._typed(source, DepthHandler, "DPM1 depth (.dpm)").read(source)

    def camera(self, source: Path) -> Tuple[CameraIntrinsics, CameraPose]:
        """Read a camera text file."""
        return self._typed(source, CameraHandler, "camera text (.txt, .cam)").read(source)

    def array(self, source: Path) -> np.ndarray:
        """Read a .npy prediction array."""
        return self._typed(source, ArrayHandler, "numpy array (.npy)").read(source)

    def grid(self, source: Path, *kinds: GridKind) -> VoxelGrid:
        """Read a grid file and check its payload kind."""
        grid_file = self._typed(source, GridHandler, "voxel grid (.vxg)").read(source)
        if kinds and grid_file.kind not in kinds:
            expected = ", ".join(k.name.lower() for k in kinds)
            raise UsageError(f"{source}: grid holds {grid_file.kind.name.lower()} data, expected {expected}")
        return grid_file.grid
