"""Synthetic scenes and deliberately naive reference implementations.

The oracles here share no computational code with the library modules; they
walk voxels and terms one at a time.
"""
from schemas.models import (
    NUM_LABELS,
    UNDEFINED_LGA,
    Box,
    CameraIntrinsics,
    DepthMap,
    GridGeometry,
    LabelGrid,
    LgaGrid,
    SceneSpec,
    SemanticLabel,
    Strip,
    VoxelGrid,
    VoxelMask,
)

from typing import Dict, List, Optional
import math

import numpy as np


def rasterize(spec: SceneSpec) -> LabelGrid:
    """Paint the primitives in order into an all-empty label grid."""
    dims = spec.geometry.dims
    labels = np.zeros(dims, dtype=np.uint8)
    for i, primitive in enumerate(spec.primitives):
        if isinstance(primitive, Box):
            lo = primitive.min_index
            hi = tuple(a + s for a, s in zip(lo, primitive.size))
        else:
            lo = primitive.start
            hi = list(a + 1 for a in lo)
            hi[primitive.axis] = lo[primitive.axis] + primitive.length
        if any(h > n for h, n in zip(hi, dims)):
            raise ValueError(f"primitive {i} ({primitive.kind}) spans {lo}..{tuple(hi)} outside grid dims {dims}")
        labels[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] = int(primitive.label)
    return LabelGrid(geometry=spec.geometry, data=labels)


def random_labels(geometry: GridGeometry, seed: int, num_labels: int = NUM_LABELS, empty_fraction: float = 0.5) -> LabelGrid:
    """Seeded label grid: empty with probability empty_fraction, otherwise uniform over 1..num_labels-1."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(1, num_labels, size=geometry.dims)
    labels[rng.random(geometry.dims) < empty_fraction] = 0
    return LabelGrid(geometry=geometry, data=labels.astype(np.uint8))


def random_scene_spec(geometry: GridGeometry, seed: int, n_primitives: int = 8) -> SceneSpec:
    """Seeded mix of boxes and strips that fit inside the grid."""
    rng = np.random.default_rng(seed)
    primitives = []
    for _ in range(n_primitives):
        label = SemanticLabel(int(rng.integers(1, NUM_LABELS)))
        if rng.random() < 0.7:
            size = tuple(int(rng.integers(1, n + 1)) for n in geometry.dims)
            lo = tuple(int(rng.integers(0, n - s + 1)) for n, s in zip(geometry.dims, size))
            primitives.append(Box(label=label, min_index=lo, size=size))
        else:
            axis = int(rng.integers(0, 3))
            length = int(rng.integers(1, geometry.dims[axis] + 1))
            start = [int(rng.integers(0, n)) for n in geometry.dims]
            start[axis] = int(rng.integers(0, geometry.dims[axis] - length + 1))
            primitives.append(Strip(label=label, start=tuple(start), axis=axis, length=length))
    return SceneSpec(geometry=geometry, primitives=primitives, seed=seed)


def plane_depth(width: int, height: int, depth: float) -> DepthMap:
    """Fronto-parallel wall at a constant depth filling the image."""
    return DepthMap(width=width, height=height, depth=np.full(width * height, float(depth)))


def fov_intrinsics(width: int, height: int, fov_deg: float = 90.0) -> CameraIntrinsics:
    """Square-pixel intrinsics whose horizontal field of view spans exactly the image."""
    f = (width / 2.0) / math.tan(math.radians(fov_deg) / 2.0)
    return CameraIntrinsics(fx=f, fy=f, cx=width / 2.0 - 0.5, cy=height / 2.0 - 0.5)


def oracle_lga(labels: VoxelGrid, free_space: VoxelMask) -> LgaGrid:
    """Six-neighbor label comparison, one voxel at a time."""
    nx, ny, nz = labels.geometry.dims
    out = np.full((nx, ny, nz), UNDEFINED_LGA, dtype=np.uint8)
    for x in range(nx):
        for y in range(ny):
            for z in range(nz):
                if free_space.data[x, y, z]:
                    continue
                own = int(labels.data[x, y, z])
                count = 0
                for qx, qy, qz in ((x + 1, y, z), (x - 1, y, z), (x, y + 1, z), (x, y - 1, z), (x, y, z + 1), (x, y, z - 1)):
                    if not (0 <= qx < nx and 0 <= qy < ny and 0 <= qz < nz):
                        continue
                    if int(labels.data[qx, qy, qz]) != own:
                        count += 1
                out[x, y, z] = count
    return LgaGrid(geometry=labels.geometry, data=out)


def oracle_confusion(pred: VoxelGrid, gt: VoxelGrid, mask: VoxelMask) -> Dict[int, Dict[str, int]]:
    """Per-class TP/FP/FN tallied voxel by voxel."""
    counts = {c: {"tp": 0, "fp": 0, "fn": 0} for c in range(NUM_LABELS)}
    nx, ny, nz = gt.geometry.dims
    for x in range(nx):
        for y in range(ny):
            for z in range(nz):
                if not mask.data[x, y, z]:
                    continue
                p = int(pred.data[x, y, z])
                g = int(gt.data[x, y, z])
                if p == g:
                    counts[g]["tp"] += 1
                else:
                    counts[p]["fp"] += 1
                    counts[g]["fn"] += 1
    return counts


def oracle_loss(
    name: str,
    probs: List[List[float]],
    targets: List[int],
    mask: Optional[List[bool]] = None,
    importance: Optional[List[float]] = None,
    weights: Optional[List[float]] = None,
    gamma: float = 2.0,
    epsilon: float = 1e-12,
) -> float:
    """Evaluate a named loss term by term from its printed formula."""
    n_voxels = len(probs)
    n_classes = len(probs[0])
    keep = [True] * n_voxels if mask is None else [bool(m) for m in mask]
    count = sum(1 for k in keep if k)

    if name == "dice":
        total = 0.0
        for c in range(n_classes):
            inter = 0.0
            y_sq = 0.0
            p_sq = 0.0
            for n in range(n_voxels):
                if not keep[n]:
                    continue
                y = 1.0 if targets[n] == c else 0.0
                inter += y * probs[n][c]
                y_sq += y * y
                p_sq += probs[n][c] * probs[n][c]
            total += 1.0 - 2.0 * inter / (y_sq + p_sq + epsilon)
        return total

    total = 0.0
    for n in range(n_voxels):
        if not keep[n]:
            continue
        for c in range(n_classes):
            y = 1.0 if targets[n] == c else 0.0
            if y == 0.0:
                continue
            log_p = math.log(max(probs[n][c], epsilon))
            if name == "pa":
                factor = 1.0 if importance is None else importance[n]
            elif name == "wce":
                factor = 1.0 if weights is None else weights[c]
            elif name == "focal":
                factor = (1.0 - probs[n][c]) ** gamma
            else:
                raise ValueError(f"Unknown loss type: {name}")
            total += factor * y * log_p
    return -total / count
