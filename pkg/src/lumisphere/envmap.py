"""Distant illumination as a lat-long radiance map.

Direction convention (fixed here): the polar angle theta = acos(z) runs
down the rows (v = 0 at +z), azimuth phi = atan2(y, x) in [0, 2*pi) runs
along the columns. Texel (v, u) looks along theta = (v + 0.5)/H * pi,
phi = (u + 0.5)/W * 2*pi. Lookups are nearest-texel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import hdr
from .core import _freeze


@dataclass(frozen=True)
class EnvironmentMap:
    radiance: np.ndarray  # (H, W, 3) float, linear, >= 0

    def __post_init__(self):
        radiance = np.asarray(self.radiance, dtype=np.float64)
        if radiance.ndim != 3 or radiance.shape[2] != 3:
            raise ValueError(f"radiance must be (H, W, 3), got {radiance.shape}")
        h, w = radiance.shape[:2]
        if h < 2 or w < 4:
            raise ValueError(f"environment map needs H >= 2 and W >= 4, got {w}x{h}")
        if not np.all(np.isfinite(radiance)) or np.any(radiance < 0):
            raise ValueError("environment radiance must be finite and non-negative")
        object.__setattr__(self, "radiance", _freeze(radiance))

    @property
    def height(self) -> int:
        return self.radiance.shape[0]

    @property
    def width(self) -> int:
        return self.radiance.shape[1]

    @classmethod
    def constant(cls, value, width: int = 8, height: int = 4) -> "EnvironmentMap":
        value = np.asarray(value, dtype=np.float64).reshape(3)
        return cls(np.broadcast_to(value, (height, width, 3)).copy())

    def sample(self, dirs: np.ndarray) -> np.ndarray:
        """Nearest-texel radiance for (..., 3) unit directions."""
        dirs = np.asarray(dirs, dtype=np.float64)
        v, u = direction_to_texel(dirs, self.width, self.height)
        return self.radiance[v, u]

    def rotated_z(self, texels: int) -> "EnvironmentMap":
        """Rotate about +z by an integer number of texels (azimuth roll)."""
        return EnvironmentMap(np.roll(self.radiance, -texels, axis=1))


def direction_to_texel(dirs: np.ndarray, width: int, height: int):
    dirs = np.asarray(dirs, dtype=np.float64)
    theta = np.arccos(np.clip(dirs[..., 2], -1.0, 1.0))
    phi = np.mod(np.arctan2(dirs[..., 1], dirs[..., 0]), 2.0 * math.pi)
    v = np.clip((theta / math.pi * height).astype(np.int64), 0, height - 1)
    u = np.clip((phi / (2.0 * math.pi) * width).astype(np.int64), 0, width - 1)
    return v, u


def texel_to_direction(v, u, width: int, height: int) -> np.ndarray:
    theta = (np.asarray(v, dtype=np.float64) + 0.5) / height * math.pi
    phi = (np.asarray(u, dtype=np.float64) + 0.5) / width * 2.0 * math.pi
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def load_envmap(path) -> EnvironmentMap:
    return EnvironmentMap(hdr.load_hdr(path))


def save_envmap(path, env: EnvironmentMap) -> None:
    hdr.write_hdr(path, env.radiance)
