"""Voxel grid geometry, label semantics and label downsampling."""
from schemas.models import (
    NUM_LABELS,
    GridGeometry,
    Index3,
    LabelGrid,
    MaskGrid,
    VoxelGrid,
    VoxelMask,
)

from typing import Optional, Sequence, Tuple
import logging

import numpy as np

logger = logging.getLogger(__name__)

# Points within this many voxel units below an interior face snap onto it (floor rule on
# boundaries). The inside test uses the unsnapped position, so the extent stays [0, dims).
_BOUNDARY_SNAP = 1e-9


def world_to_index_array(geometry: GridGeometry, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Voxel indices for world points of shape (..., 3) and a mask of points inside the grid."""
    points = np.asarray(points, dtype=np.float64)
    dims = np.asarray(geometry.dims)
    scaled = (points - np.asarray(geometry.origin)) / geometry.voxel_size
    finite = np.isfinite(scaled)
    valid = np.all(finite & (scaled >= 0) & (scaled < dims), axis=-1)
    indices = np.floor(np.where(finite, scaled, -1.0) + _BOUNDARY_SNAP).astype(np.int64)
    # a point just under the upper extent stays in the last voxel
    indices = np.where(valid[..., None], np.minimum(indices, dims - 1), indices)
    return indices, valid


def world_to_index(geometry: GridGeometry, point: Sequence[float]) -> Optional[Index3]:
    """Voxel containing ``point``, or None outside [0, dims)."""
    indices, valid = world_to_index_array(geometry, np.asarray(point, dtype=np.float64).reshape(1, 3))
    if not valid[0]:
        return None
    return tuple(int(i) for i in indices[0])


def index_to_center(geometry: GridGeometry, ix: int, iy: int, iz: int) -> Tuple[float, float, float]:
    """World coordinates of the center of voxel (ix, iy, iz)."""
    for axis, (i, n) in enumerate(zip((ix, iy, iz), geometry.dims)):
        if not 0 <= i < n:
            raise IndexError(f"voxel index {i} out of range [0, {n}) on axis {axis}")
    return tuple(o + (i + 0.5) * geometry.voxel_size for o, i in zip(geometry.origin, (ix, iy, iz)))


def voxel_centers(geometry: GridGeometry) -> np.ndarray:
    """World coordinates of every voxel center, shape (nx, ny, nz, 3)."""
    axes = [
        o + (np.arange(n, dtype=np.float64) + 0.5) * geometry.voxel_size
        for o, n in zip(geometry.origin, geometry.dims)
    ]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def label_grid(geometry: GridGeometry, data) -> LabelGrid:
    return LabelGrid(geometry=geometry, data=data)


def voxel_mask(geometry: GridGeometry, data) -> VoxelMask:
    return MaskGrid(geometry=geometry, data=np.asarray(data, dtype=bool))


def require_mask(mask: VoxelGrid) -> None:
    if mask.data.dtype != np.bool_:
        raise ValueError(f"mask grid must hold booleans, got {mask.data.dtype}")


def free_space_mask(labels: VoxelGrid) -> VoxelMask:
    """True exactly where the label is empty (0)."""
    return voxel_mask(labels.geometry, labels.data == 0)


def require_same_geometry(*grids: VoxelGrid) -> None:
    first = grids[0].geometry
    for grid in grids[1:]:
        if grid.geometry != first:
            raise ValueError(f"grid geometry mismatch: {first} vs {grid.geometry}")


def _blocks(data: np.ndarray, factor: int) -> np.ndarray:
    """View (nx/f, ny/f, nz/f, f**3) of the factor-sized blocks."""
    nx, ny, nz = data.shape
    blocks = data.reshape(nx // factor, factor, ny // factor, factor, nz // factor, factor)
    return blocks.transpose(0, 2, 4, 1, 3, 5).reshape(nx // factor, ny // factor, nz // factor, factor ** 3)


def _downsampled_geometry(geometry: GridGeometry, factor: int) -> GridGeometry:
    if factor < 1:
        raise ValueError(f"downsampling factor must be positive, got {factor}")
    if any(n % factor for n in geometry.dims):
        raise ValueError(f"dims {geometry.dims} are not divisible by factor {factor}")
    return GridGeometry(
        dims=tuple(n // factor for n in geometry.dims),
        voxel_size=geometry.voxel_size * factor,
        origin=geometry.origin,
    )


def downsample_labels(labels: VoxelGrid, factor: int) -> LabelGrid:
    """Majority label per factor**3 block; ties go to the lowest label code."""
    geometry = _downsampled_geometry(labels.geometry, factor)
    blocks = _blocks(np.asarray(labels.data), factor)
    counts = np.stack([(blocks == code).sum(axis=-1) for code in range(NUM_LABELS)], axis=-1)
    # argmax returns the first maximum, i.e. the lowest code on ties
    majority = counts.argmax(axis=-1).astype(np.uint8)
    logger.debug("Downsampled labels %s -> %s", labels.geometry.dims, geometry.dims)
    return label_grid(geometry, majority)


def downsample_mask(mask: VoxelMask, factor: int) -> VoxelMask:
    """A block is kept when any of its voxels is kept."""
    require_mask(mask)
    geometry = _downsampled_geometry(mask.geometry, factor)
    return voxel_mask(geometry, _blocks(np.asarray(mask.data), factor).any(axis=-1))
