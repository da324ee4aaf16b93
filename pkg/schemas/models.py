from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    FiniteFloat,
    NonNegativeInt,
    PositiveFloat,
    PositiveInt,
    ValidationInfo,
    field_validator,
    model_validator,
)
from typing import Dict, List, Literal, Optional, Tuple, Union
from enum import IntEnum
import math

import numpy as np

Index3 = Tuple[int, int, int]
Vec3 = Tuple[FiniteFloat, FiniteFloat, FiniteFloat]


# Semantic labels; 0 is the only free-space label
class SemanticLabel(IntEnum):
    EMPTY = 0
    CEILING = 1
    FLOOR = 2
    WALL = 3
    WINDOW = 4
    CHAIR = 5
    BED = 6
    SOFA = 7
    TABLE = 8
    TVS = 9
    FURNITURE = 10
    OBJECTS = 11

    @property
    def short_name(self) -> str:
        return _SHORT_NAMES[self]


_SHORT_NAMES = {
    SemanticLabel.EMPTY: "empty",
    SemanticLabel.CEILING: "ceil.",
    SemanticLabel.FLOOR: "floor",
    SemanticLabel.WALL: "wall",
    SemanticLabel.WINDOW: "win.",
    SemanticLabel.CHAIR: "chair",
    SemanticLabel.BED: "bed",
    SemanticLabel.SOFA: "sofa",
    SemanticLabel.TABLE: "table",
    SemanticLabel.TVS: "tvs",
    SemanticLabel.FURNITURE: "furn.",
    SemanticLabel.OBJECTS: "objs.",
}

NUM_LABELS = len(SemanticLabel)
OBJECT_CLASSES: Tuple[SemanticLabel, ...] = tuple(SemanticLabel)[1:]

# Sentinel stored in LGA grids for free-space voxels
UNDEFINED_LGA = 255
MAX_LGA = 6


# On-disk payload kinds of the VXG1 grid format
class GridKind(IntEnum):
    LABELS = 0
    SCALAR = 1
    LGA = 2
    MASK = 3


# World anchoring of a dense grid
class GridGeometry(BaseModel):
    model_config = ConfigDict(frozen=True)

    dims: Tuple[PositiveInt, PositiveInt, PositiveInt] = Field(description="Voxel counts (nx, ny, nz).")
    voxel_size: PositiveFloat = Field(description="Edge length of a voxel in meters.")
    origin: Vec3 = Field(default=(0.0, 0.0, 0.0), description="World coordinates of the min-corner of voxel (0, 0, 0).")

    @property
    def num_voxels(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    @property
    def extent(self) -> Tuple[float, float, float]:
        return tuple(d * self.voxel_size for d in self.dims)


# Dense voxel grid; data is indexed [ix, iy, iz(, feature)] and flattens x-fastest
class VoxelGrid(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    geometry: GridGeometry = Field(description="Grid geometry shared by every voxel.")
    data: np.ndarray = Field(description="Read-only voxel values; a flat payload is read x-fastest, then y, then z.")

    @field_validator("data", mode="before")
    @classmethod
    def _shape_data(cls, value, info: ValidationInfo):
        geometry = info.data.get("geometry")
        if geometry is None:
            return value
        data = np.array(value)
        if data.ndim == 1:
            if data.size != geometry.num_voxels:
                raise ValueError(f"data length {data.size} does not match dims {geometry.dims} ({geometry.num_voxels} voxels)")
            data = data.reshape(geometry.dims, order="F")
        elif data.shape[:3] != tuple(geometry.dims):
            raise ValueError(f"data shape {data.shape} does not match dims {geometry.dims}")
        data.flags.writeable = False
        return data

    def flat(self) -> np.ndarray:
        """Voxel values in x-fastest order, shape (N,) or (N, F) for vector grids."""
        if self.data.ndim == 3:
            return self.data.reshape(-1, order="F")
        return self.data.reshape((self.geometry.num_voxels, -1), order="F")


# Boolean grid; true marks voxels taking part in a computation
class MaskGrid(VoxelGrid):
    @field_validator("data", mode="after")
    @classmethod
    def _check_mask(cls, data):
        if data.dtype != np.bool_:
            raise ValueError(f"mask data must be boolean, got {data.dtype}")
        return data


VoxelMask = MaskGrid


class LabelGrid(VoxelGrid):
    @field_validator("data", mode="after")
    @classmethod
    def _check_labels(cls, data):
        if not np.issubdtype(data.dtype, np.integer):
            raise ValueError(f"semantic labels must be integers, got {data.dtype}")
        if data.size and (data.min() < 0 or data.max() >= NUM_LABELS):
            raise ValueError(f"semantic labels must be in 0..{NUM_LABELS - 1}")
        labels = data.astype(np.uint8)
        labels.flags.writeable = False
        return labels


class TsdfGrid(VoxelGrid):
    truncation: PositiveFloat = Field(description="Truncation distance in meters used to normalize distances.")

    @model_validator(mode="after")
    def _check_range(self):
        if np.isnan(self.data).any() or (np.abs(self.data) > 1.0).any():
            raise ValueError("TSDF values must lie in [-1, 1]")
        return self


class FTsdfGrid(VoxelGrid):
    @model_validator(mode="after")
    def _check_range(self):
        if np.isnan(self.data).any() or (np.abs(self.data) > 1.0).any():
            raise ValueError("f-TSDF values must lie in [-1, 1]")
        return self


class LgaGrid(VoxelGrid):
    @model_validator(mode="after")
    def _check_values(self):
        values = self.data
        if values.dtype != np.uint8:
            raise ValueError(f"LGA grid must be uint8, got {values.dtype}")
        if ((values > MAX_LGA) & (values != UNDEFINED_LGA)).any():
            raise ValueError(f"LGA values must be in 0..{MAX_LGA} or {UNDEFINED_LGA} (undefined)")
        return self

    @property
    def defined(self) -> np.ndarray:
        return self.data != UNDEFINED_LGA


class ImportanceGrid(VoxelGrid):
    @model_validator(mode="after")
    def _check_values(self):
        if self.data.size and (not np.isfinite(self.data).all() or self.data.min() < 0):
            raise ValueError("importance values must be finite and non-negative")
        return self


# Single-view depth observation, meters, 0.0 marks missing depth
class DepthMap(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    width: PositiveInt = Field(description="Image width in pixels.")
    height: PositiveInt = Field(description="Image height in pixels.")
    depth: np.ndarray = Field(description="Depth in meters, shape (height, width); a flat payload is row-major.")

    @field_validator("depth", mode="before")
    @classmethod
    def _shape_depth(cls, value, info: ValidationInfo):
        if "width" not in info.data or "height" not in info.data:
            return value
        width, height = info.data["width"], info.data["height"]
        depth = np.array(value, dtype=np.float64)
        if depth.size != width * height:
            raise ValueError(f"depth length {depth.size} does not match {width}x{height}")
        depth = depth.reshape(height, width)
        if not np.isfinite(depth).all():
            raise ValueError("depth values must be finite")
        if (depth < 0).any():
            raise ValueError("depth values must be non-negative")
        depth.flags.writeable = False
        return depth


class CameraIntrinsics(BaseModel):
    model_config = ConfigDict(frozen=True)

    fx: PositiveFloat = Field(description="Horizontal focal length in pixels.")
    fy: PositiveFloat = Field(description="Vertical focal length in pixels.")
    cx: FiniteFloat = Field(description="Principal point column in pixels.")
    cy: FiniteFloat = Field(description="Principal point row in pixels.")


# Rigid transform from camera coordinates to world coordinates
class CameraPose(BaseModel):
    model_config = ConfigDict(frozen=True)

    rotation: Tuple[Vec3, Vec3, Vec3] = Field(
        default=((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)),
        description="Rows of the 3x3 rotation matrix.",
    )
    translation: Vec3 = Field(default=(0.0, 0.0, 0.0), description="Camera position in world meters.")

    @model_validator(mode="after")
    def _check_rotation(self):
        r = self.matrix
        if not np.allclose(r @ r.T, np.eye(3), rtol=0.0, atol=1e-6):
            raise ValueError("rotation is not orthonormal within 1e-6")
        if np.linalg.det(r) <= 0:
            raise ValueError("rotation must have determinant +1")
        return self

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.rotation, dtype=np.float64)

    @property
    def position(self) -> np.ndarray:
        return np.array(self.translation, dtype=np.float64)


# Per-pixel mapping index into a grid; -1 marks an empty entry
class ProjectionMap(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    geometry: GridGeometry = Field(description="Target grid geometry.")
    width: PositiveInt
    height: PositiveInt
    indices: np.ndarray = Field(description="Voxel index per pixel, shape (height, width, 3), -1 where empty.")

    @model_validator(mode="after")
    def _check_indices(self):
        idx = self.indices
        if idx.shape != (self.height, self.width, 3):
            raise ValueError(f"indices shape {idx.shape} does not match {self.height}x{self.width}")
        present = idx[..., 0] >= 0
        if present.any():
            hits = idx[present]
            if (hits < 0).any() or (hits >= np.array(self.geometry.dims)).any():
                raise ValueError("projection map entry outside grid dims")
        return self

    @property
    def valid(self) -> np.ndarray:
        return self.indices[..., 0] >= 0

    def entry(self, u: int, v: int) -> Optional[Index3]:
        if not self.valid[v, u]:
            return None
        return tuple(int(i) for i in self.indices[v, u])


# Loss inputs
class LogitVolume(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    values: np.ndarray = Field(description="Unnormalized scores, shape (N, C).")

    @field_validator("values", mode="before")
    @classmethod
    def _check_values(cls, value):
        values = np.array(value, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError(f"logits must be 2-D (N, C), got shape {values.shape}")
        if not np.isfinite(values).all():
            raise ValueError("logits must be finite")
        return values


class ProbabilityVolume(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    values: np.ndarray = Field(description="Row-stochastic class probabilities, shape (N, C).")

    @field_validator("values", mode="before")
    @classmethod
    def _check_values(cls, value):
        values = np.array(value, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError(f"probabilities must be 2-D (N, C), got shape {values.shape}")
        if not np.isfinite(values).all() or (values < 0).any() or (values > 1).any():
            raise ValueError("probabilities must lie in [0, 1]")
        if values.size and not np.allclose(values.sum(axis=1), 1.0, rtol=0.0, atol=1e-9):
            raise ValueError("probability rows must sum to 1 within 1e-9")
        return values


class TargetVolume(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    labels: np.ndarray = Field(description="Ground-truth class per voxel, shape (N,).")
    mask: Optional[np.ndarray] = Field(default=None, description="Optional participation mask, shape (N,).")

    @field_validator("labels", mode="before")
    @classmethod
    def _check_labels(cls, value):
        labels = np.array(value).reshape(-1)
        if labels.size and not np.issubdtype(labels.dtype, np.integer):
            raise ValueError("target labels must be integers")
        if (labels < 0).any():
            raise ValueError("target labels must be non-negative")
        return labels.astype(np.int64)

    @field_validator("mask", mode="before")
    @classmethod
    def _check_mask(cls, value, info: ValidationInfo):
        if value is None:
            return None
        mask = np.array(value, dtype=bool).reshape(-1)
        labels = info.data.get("labels")
        if labels is not None and mask.size != labels.size:
            raise ValueError(f"mask length {mask.size} does not match {labels.size} targets")
        return mask

    @property
    def participating(self) -> np.ndarray:
        if self.mask is None:
            return np.ones(self.labels.size, dtype=bool)
        return self.mask


class ClassWeights(BaseModel):
    model_config = ConfigDict(frozen=True)

    weights: Tuple[float, ...] = Field(description="Non-negative weight w_c per class.")

    @field_validator("weights")
    @classmethod
    def _check_weights(cls, value):
        if any(not math.isfinite(w) or w < 0 for w in value):
            raise ValueError("class weights must be finite and non-negative")
        if not any(w > 0 for w in value):
            raise ValueError("at least one class weight must be positive")
        return value

    @property
    def array(self) -> np.ndarray:
        return np.array(self.weights, dtype=np.float64)


class LossConfig(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    lambda_: float = Field(default=1.0, ge=0.0, alias="lambda", description="Base importance value.")
    alpha: float = Field(default=0.5, ge=0.0, description="Importance gain per unit of LGA.")
    gamma: float = Field(default=2.0, ge=0.0, description="Focal loss modulating exponent.")
    epsilon: float = Field(default=1e-12, gt=0.0, description="Floor inside logs and dice denominators.")


# LGA population statistics
class LgaHistogram(BaseModel):
    model_config = ConfigDict(frozen=True)

    counts: Tuple[NonNegativeInt, ...] = Field(description="Defined voxels per LGA value 0..6.")
    fractions: Tuple[float, ...] = Field(description="counts normalized by their sum.")

    @model_validator(mode="after")
    def _check_normalized(self):
        if len(self.counts) != MAX_LGA + 1 or len(self.fractions) != MAX_LGA + 1:
            raise ValueError(f"histogram needs {MAX_LGA + 1} bins")
        if abs(math.fsum(self.fractions) - 1.0) > 1e-12:
            raise ValueError("histogram fractions must sum to 1")
        return self


# Evaluation
class RoomBounds(BaseModel):
    model_config = ConfigDict(frozen=True)

    min_corner: Vec3 = Field(description="Minimum world corner of the room box, meters.")
    max_corner: Vec3 = Field(description="Maximum world corner of the room box, meters.")

    @model_validator(mode="after")
    def _check_order(self):
        if any(lo > hi for lo, hi in zip(self.min_corner, self.max_corner)):
            raise ValueError("room min_corner must not exceed max_corner")
        return self

    def contains(self, points: np.ndarray) -> np.ndarray:
        lo = np.array(self.min_corner)
        hi = np.array(self.max_corner)
        return np.all((points >= lo) & (points <= hi), axis=-1)


class ScMetrics(BaseModel):
    model_config = ConfigDict(frozen=True)

    precision: Optional[float] = Field(description="TP/(TP+FP); None when undefined (0/0).")
    recall: Optional[float] = Field(description="TP/(TP+FN); None when undefined (0/0).")
    iou: Optional[float] = Field(description="TP/(TP+FP+FN); None when undefined (0/0).")
    tp: NonNegativeInt
    fp: NonNegativeInt
    fn: NonNegativeInt


class MetricsReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    sc_precision: Optional[float]
    sc_recall: Optional[float]
    sc_iou: Optional[float]
    sc_tp: NonNegativeInt
    sc_fp: NonNegativeInt
    sc_fn: NonNegativeInt
    per_class_iou: Dict[int, Optional[float]] = Field(description="IoU per object class 1..11; None when absent from prediction and ground truth.")
    class_tp: Dict[int, NonNegativeInt]
    class_fp: Dict[int, NonNegativeInt]
    class_fn: Dict[int, NonNegativeInt]
    mean_iou: Optional[float] = Field(description="Mean IoU over classes with a defined IoU; None if no class is defined.")
    excluded_classes: Tuple[int, ...] = Field(description="Classes left out of mean_iou because TP+FP+FN = 0.")


# Synthetic scenes
class Box(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["box"] = "box"
    label: SemanticLabel
    min_index: Tuple[NonNegativeInt, NonNegativeInt, NonNegativeInt] = Field(description="Lowest voxel index covered.")
    size: Tuple[PositiveInt, PositiveInt, PositiveInt] = Field(description="Extent in voxels per axis.")


class Strip(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["strip"] = "strip"
    label: SemanticLabel
    start: Tuple[NonNegativeInt, NonNegativeInt, NonNegativeInt] = Field(description="First voxel of the strip.")
    axis: Literal[0, 1, 2] = Field(description="Axis along which the 1-voxel-wide strip runs.")
    length: PositiveInt


class SceneSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    geometry: GridGeometry
    primitives: List[Union[Box, Strip]] = Field(default_factory=list, description="Painted in order; later primitives overwrite earlier ones.")
    seed: Optional[int] = Field(default=None, description="Seed the scene was generated from, if randomized.")


# Decoded VXG1 file
class GridFile(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: GridKind
    grid: VoxelGrid
