from schemas.models import Box, CameraPose, GridGeometry, SceneSpec, SemanticLabel, Strip
from ssc.synth import fov_intrinsics, rasterize

import pytest


@pytest.fixture
def cube_labels():
    """3x3x3 solid cube of one label inside a 5x5x5 empty grid."""
    spec = SceneSpec(
        geometry=GridGeometry(dims=(5, 5, 5), voxel_size=0.02),
        primitives=[Box(label=SemanticLabel.FURNITURE, min_index=(1, 1, 1), size=(3, 3, 3))],
    )
    return rasterize(spec)


@pytest.fixture
def isolated_labels():
    spec = SceneSpec(
        geometry=GridGeometry(dims=(3, 3, 3), voxel_size=0.02),
        primitives=[Box(label=SemanticLabel.CHAIR, min_index=(1, 1, 1), size=(1, 1, 1))],
    )
    return rasterize(spec)


@pytest.fixture
def strip_labels():
    """1x1x5 strip along z, occupying (1, 1, 1..5) of a 3x3x7 grid."""
    spec = SceneSpec(
        geometry=GridGeometry(dims=(3, 3, 7), voxel_size=0.02),
        primitives=[Strip(label=SemanticLabel.TABLE, start=(1, 1, 1), axis=2, length=5)],
    )
    return rasterize(spec)


@pytest.fixture
def square_camera():
    """90 degree field of view, 64x64 pixels, camera at the world origin looking down +z."""
    return fov_intrinsics(64, 64, 90.0), CameraPose()


@pytest.fixture
def plane_camera():
    return fov_intrinsics(64, 48, 90.0), CameraPose()
