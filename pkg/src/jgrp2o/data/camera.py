"""Pinhole camera model: UVZ image coordinates <-> world millimeters."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError, ValidationError


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValidationError(f"focal lengths must be positive: fx={self.fx}, fy={self.fy}")


def uvz_to_xyz(uvz, intrinsics):
    """Back-project (u, v, z_mm) image points to world mm.

    x = (u - cx) * z / fx, y = (v - cy) * z / fy. Accepts (..., 3) arrays.
    """
    uvz = np.asarray(uvz, dtype=np.float64)
    z = uvz[..., 2]
    if np.any(z <= 0):
        raise DataError("uvz_to_xyz requires positive depth")
    x = (uvz[..., 0] - intrinsics.cx) * z / intrinsics.fx
    y = (uvz[..., 1] - intrinsics.cy) * z / intrinsics.fy
    return np.stack([x, y, z], axis=-1)


def xyz_to_uvz(xyz, intrinsics):
    """Project world-mm points to (u, v, z_mm); inverse of uvz_to_xyz."""
    xyz = np.asarray(xyz, dtype=np.float64)
    z = xyz[..., 2]
    if np.any(z <= 0):
        raise DataError("xyz_to_uvz requires positive depth")
    u = xyz[..., 0] * intrinsics.fx / z + intrinsics.cx
    v = xyz[..., 1] * intrinsics.fy / z + intrinsics.cy
    return np.stack([u, v, z], axis=-1)
