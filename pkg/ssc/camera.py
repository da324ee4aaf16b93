"""Pinhole depth geometry and the pixel-to-voxel mapping index.

Camera axes are x right, y down, z forward. A pixel coordinate is the pixel's
integer index; projected points are looked up at the nearest pixel.
"""
from schemas.models import (
    CameraIntrinsics,
    CameraPose,
    DepthMap,
    GridGeometry,
    ProjectionMap,
    VoxelGrid,
    VoxelMask,
)
from ssc.grid import voxel_mask, world_to_index_array

from typing import Tuple
import logging

import numpy as np

logger = logging.getLogger(__name__)


def unproject(u: np.ndarray, v: np.ndarray, depth: np.ndarray, intr: CameraIntrinsics, pose: CameraPose) -> np.ndarray:
    """World points for (possibly fractional) pixel coordinates at the given depths."""
    u, v, depth = np.broadcast_arrays(*(np.asarray(a, dtype=np.float64) for a in (u, v, depth)))
    cam = np.stack([
        depth * (u - intr.cx) / intr.fx,
        depth * (v - intr.cy) / intr.fy,
        depth,
    ], axis=-1)
    return cam @ pose.matrix.T + pose.position


def project(points: np.ndarray, intr: CameraIntrinsics, pose: CameraPose) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Continuous pixel coordinates (u, v) and camera-space depth z of world points."""
    cam = (np.asarray(points, dtype=np.float64) - pose.position) @ pose.matrix
    x, y, z = cam[..., 0], cam[..., 1], cam[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = intr.fx * x / z + intr.cx
        v = intr.fy * y / z + intr.cy
    return u, v, z


def nearest_pixel(u: np.ndarray, v: np.ndarray, z: np.ndarray, width: int, height: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nearest pixel indices and a mask of points in front of the camera that land inside the image."""
    inside = z > 0
    with np.errstate(invalid="ignore"):
        col = np.floor(np.where(inside, u, -1.0) + 0.5)
        row = np.floor(np.where(inside, v, -1.0) + 0.5)
    inside &= (col >= 0) & (col < width) & (row >= 0) & (row < height)
    col = np.where(inside, col, 0).astype(np.int64)
    row = np.where(inside, row, 0).astype(np.int64)
    return col, row, inside


def _pixel_points(depth: DepthMap, intr: CameraIntrinsics, pose: CameraPose) -> Tuple[np.ndarray, np.ndarray]:
    rows, cols = np.indices((depth.height, depth.width), dtype=np.float64)
    points = unproject(cols, rows, depth.depth, intr, pose)
    return points, depth.depth > 0


def backproject(depth: DepthMap, intr: CameraIntrinsics, pose: CameraPose) -> np.ndarray:
    """World points of every valid pixel in row-major pixel order, shape (M, 3)."""
    points, valid = _pixel_points(depth, intr, pose)
    return points[valid]


def compute_projection_map(depth: DepthMap, intr: CameraIntrinsics, pose: CameraPose, geometry: GridGeometry) -> ProjectionMap:
    """Mapping index from each pixel to the voxel its back-projected point falls in."""
    points, valid = _pixel_points(depth, intr, pose)
    indices, inside = world_to_index_array(geometry, points)
    present = valid & inside
    indices = np.where(present[..., None], indices, -1)
    logger.debug("Projection map: %d of %d pixels hit the grid", int(present.sum()), present.size)
    return ProjectionMap(geometry=geometry, width=depth.width, height=depth.height, indices=indices)


def scatter_to_volume(features: np.ndarray, projection: ProjectionMap, geometry: GridGeometry) -> Tuple[VoxelGrid, VoxelMask]:
    """Scatter per-pixel feature vectors (height, width, F) into the grid with an element-wise max."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 2:
        features = features[..., None]
    if features.shape[:2] != (projection.height, projection.width):
        raise ValueError(
            f"feature map {features.shape[:2]} does not match projection map {(projection.height, projection.width)}"
        )
    if projection.geometry != geometry:
        raise ValueError("projection map was computed for a different grid geometry")

    n_features = features.shape[2]
    nx, ny, nz = geometry.dims
    valid = projection.valid
    hits = projection.indices[valid]
    flat_index = hits[:, 0] + nx * (hits[:, 1] + ny * hits[:, 2])

    volume = np.full((geometry.num_voxels, n_features), -np.inf)
    np.maximum.at(volume, flat_index, features[valid])
    touched = np.zeros(geometry.num_voxels, dtype=bool)
    touched[flat_index] = True
    volume[~touched] = 0.0

    grid = VoxelGrid(geometry=geometry, data=volume.reshape((nx, ny, nz, n_features), order="F"))
    mask = voxel_mask(geometry, touched.reshape((nx, ny, nz), order="F"))
    return grid, mask
