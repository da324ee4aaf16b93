"""Local Geometric Anisotropy, importance factors and LGA statistics."""
from schemas.models import (
    MAX_LGA,
    UNDEFINED_LGA,
    ImportanceGrid,
    LgaGrid,
    LgaHistogram,
    VoxelGrid,
    VoxelMask,
)
from ssc.grid import require_mask, require_same_geometry

import logging

import numpy as np

logger = logging.getLogger(__name__)

_FACE_SHIFTS = (
    (1, 0, 0),
    (-1, 0, 0),
    (0, 1, 0),
    (0, -1, 0),
    (0, 0, 1),
    (0, 0, -1),
)


def compute_lga(labels: VoxelGrid, free_space: VoxelMask) -> LgaGrid:
    """Count of face neighbors with a different label, for every non-free voxel.

    Neighbors outside the volume count as same-label. Free-space voxels are
    left undefined.
    """
    require_same_geometry(labels, free_space)
    require_mask(free_space)
    data = np.asarray(labels.data)
    nx, ny, nz = data.shape
    # edge padding makes every out-of-bounds neighbor equal to its voxel
    padded = np.pad(data, 1, mode="edge")
    lga = np.zeros(data.shape, dtype=np.uint8)
    for dx, dy, dz in _FACE_SHIFTS:
        neighbor = padded[1 + dx:1 + dx + nx, 1 + dy:1 + dy + ny, 1 + dz:1 + dz + nz]
        lga += neighbor != data
    lga[np.asarray(free_space.data, dtype=bool)] = UNDEFINED_LGA
    return LgaGrid(geometry=labels.geometry, data=lga)


def importance_grid(lga: LgaGrid, lambda_: float = 1.0, alpha: float = 0.5) -> ImportanceGrid:
    """I = lambda + alpha * LGA on defined voxels, lambda on free space."""
    if lambda_ < 0 or alpha < 0:
        raise ValueError(f"lambda and alpha must be non-negative, got lambda={lambda_}, alpha={alpha}")
    values = np.full(lga.geometry.dims, float(lambda_))
    defined = lga.defined
    values[defined] = lambda_ + alpha * lga.data[defined]
    return ImportanceGrid(geometry=lga.geometry, data=values)


def lga_histogram(lga: LgaGrid) -> LgaHistogram:
    """Counts and fractions of defined voxels per LGA value 0..6."""
    values = lga.data[lga.defined]
    if values.size == 0:
        raise ValueError("no defined voxels")
    counts = np.bincount(values, minlength=MAX_LGA + 1)
    total = int(counts.sum())
    fractions = tuple(int(c) / total for c in counts)
    logger.debug("LGA histogram over %d voxels: %s", total, counts.tolist())
    return LgaHistogram(counts=tuple(int(c) for c in counts), fractions=fractions)
