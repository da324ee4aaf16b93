"""Write synthetic fixture files for trying the CLI.

    python -m utils.fixtures fixtures/
"""
from config.log_config import LoggingConfig
from schemas.models import Box, CameraPose, GridGeometry, SceneSpec, SemanticLabel, Strip
from handlers.output_handler import OutputHandler
from ssc.synth import fov_intrinsics, plane_depth, rasterize

from pathlib import Path
from typing import Dict
import argparse

console = LoggingConfig().console

PLANE_WIDTH = 64
PLANE_HEIGHT = 48
PLANE_DEPTH = 1.5


def write_fixtures(folder: Path) -> Dict[str, Path]:
    """Plane depth view, its camera, and the canonical LGA label grids."""
    output = OutputHandler()
    paths = {name: folder / name for name in ("plane.dpm", "plane.txt", "cube.vxg", "isolated.vxg", "strip.vxg")}

    output.save_depth(plane_depth(PLANE_WIDTH, PLANE_HEIGHT, PLANE_DEPTH), paths["plane.dpm"])
    output.save_camera(fov_intrinsics(PLANE_WIDTH, PLANE_HEIGHT, 90.0), CameraPose(), paths["plane.txt"])

    # 3x3x3 solid cube surrounded by empty space
    cube = SceneSpec(
        geometry=GridGeometry(dims=(5, 5, 5), voxel_size=0.02),
        primitives=[Box(label=SemanticLabel.FURNITURE, min_index=(1, 1, 1), size=(3, 3, 3))],
    )
    output.save_grid(rasterize(cube), paths["cube.vxg"])

    isolated = SceneSpec(
        geometry=GridGeometry(dims=(3, 3, 3), voxel_size=0.02),
        primitives=[Box(label=SemanticLabel.CHAIR, min_index=(1, 1, 1), size=(1, 1, 1))],
    )
    output.save_grid(rasterize(isolated), paths["isolated.vxg"])

    strip = SceneSpec(
        geometry=GridGeometry(dims=(3, 3, 7), voxel_size=0.02),
        primitives=[Strip(label=SemanticLabel.TABLE, start=(1, 1, 1), axis=2, length=5)],
    )
    output.save_grid(rasterize(strip), paths["strip.vxg"])
    return paths


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Write synthetic SSC fixture files.")
    parser.add_argument("folder", type=Path, nargs="?", default=Path("fixtures"))
    args = parser.parse_args()
    for name, path in write_fixtures(args.folder).items():
        console.print(f"[info]{name}[/info]: {path}")
