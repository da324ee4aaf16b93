from schemas.models import GridGeometry, LossConfig

from typing import Any
from dotenv import load_dotenv
import os

load_dotenv()


def _floats(raw: str) -> tuple[float, ...]:
    return tuple(float(v) for v in raw.split(","))


class SSCConfig:
    """Centralized defaults for grid geometry, TSDF encoding and losses."""

    def __init__(self):
        self._settings = {}
        self._initialize_settings()

    def _initialize_settings(self):
        """Initialize all settings from the environment, falling back to the reference setup"""
        # Grid geometry: 4.8 x 2.88 x 4.8 m at 0.02 m
        self._settings['grid_dims'] = tuple(int(v) for v in _floats(os.getenv("SSC_GRID_DIMS", "240,144,240")))
        self._settings['voxel_size'] = float(os.getenv("SSC_VOXEL_SIZE", "0.02"))
        self._settings['grid_origin'] = _floats(os.getenv("SSC_GRID_ORIGIN", "0,0,0"))

        # TSDF encoding
        self._settings['truncation'] = float(os.getenv("SSC_TRUNCATION", "0.24"))

        # Importance factor and losses
        self._settings['lambda'] = float(os.getenv("SSC_LAMBDA", "1.0"))
        self._settings['alpha'] = float(os.getenv("SSC_ALPHA", "0.5"))
        self._settings['gamma'] = float(os.getenv("SSC_GAMMA", "2.0"))
        self._settings['epsilon'] = float(os.getenv("SSC_EPSILON", "1e-12"))

    def get(self, name: str) -> Any:
        """Get a specific setting by name"""
        if name not in self._settings:
            raise ValueError(f"Unknown setting: {name}")
        return self._settings[name]

    def grid_geometry(self) -> GridGeometry:
        return GridGeometry(
            dims=self.get('grid_dims'),
            voxel_size=self.get('voxel_size'),
            origin=self.get('grid_origin'),
        )

    def loss_config(self) -> LossConfig:
        return LossConfig(
            lambda_=self.get('lambda'),
            alpha=self.get('alpha'),
            gamma=self.get('gamma'),
            epsilon=self.get('epsilon'),
        )
