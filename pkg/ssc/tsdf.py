"""Projective TSDF and flipped-TSDF encoding of a single depth view."""
from schemas.models import (
    CameraIntrinsics,
    CameraPose,
    DepthMap,
    FTsdfGrid,
    GridGeometry,
    TsdfGrid,
    VoxelGrid,
)
from ssc.camera import nearest_pixel, project
from ssc.grid import voxel_centers

import logging

import numpy as np

logger = logging.getLogger(__name__)


def compute_tsdf(depth: DepthMap, intr: CameraIntrinsics, pose: CameraPose, geometry: GridGeometry, truncation: float) -> TsdfGrid:
    """Along-ray signed distance, positive in front of the surface, clamped to [-1, 1].

    Voxels that do not project onto a valid depth pixel are unobserved and get +1.
    """
    if not truncation > 0:
        raise ValueError(f"truncation must be positive, got {truncation}")

    values = np.ones(geometry.dims, dtype=np.float64)
    centers = voxel_centers(geometry)
    observed_count = 0
    # one z-slab at a time keeps temporaries small at full resolution
    for iz in range(geometry.dims[2]):
        u, v, z = project(centers[:, :, iz], intr, pose)
        col, row, inside = nearest_pixel(u, v, z, depth.width, depth.height)
        observed = depth.depth[row, col]
        inside &= observed > 0
        slab = values[:, :, iz]
        slab[inside] = np.clip((observed[inside] - z[inside]) / truncation, -1.0, 1.0)
        observed_count += int(inside.sum())

    logger.debug("TSDF: %d of %d voxels observed", observed_count, geometry.num_voxels)
    return TsdfGrid(geometry=geometry, data=values, truncation=truncation)


def flip_tsdf(tsdf: VoxelGrid) -> FTsdfGrid:
    """f = sign(t) * (1 - |t|) with sign(0) = +1; the surface carries the largest magnitude."""
    t = np.asarray(tsdf.data, dtype=np.float64)
    if np.isnan(t).any() or (np.abs(t) > 1.0).any():
        raise ValueError("TSDF values must lie in [-1, 1]")
    sign = np.where(t < 0, -1.0, 1.0)
    return FTsdfGrid(geometry=tsdf.geometry, data=sign * (1.0 - np.abs(t)))
