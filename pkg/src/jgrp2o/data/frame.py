"""Cropped, depth-normalized frames and their coordinate transforms.

A DepthFrame is a fixed-size square window around the hand: depth values
are mapped to [-1, 1] about the crop center depth (cube half-extent = 1),
invalid or out-of-cube pixels carry the far-plane value 1. The crop
transform is kept with the frame so normalized UVZ, original-image UVZ
and world millimeters stay interconvertible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError, ShapeError, ValidationError
from .camera import CameraIntrinsics, uvz_to_xyz, xyz_to_uvz

FAR_PLANE = 1.0


@dataclass
class DepthFrame:
    pixels: np.ndarray  # (S, S) normalized depth, float32
    valid: np.ndarray  # (S, S) bool
    window: tuple  # (col0, row0, width, height) in original image pixels
    center_z: float  # crop center depth, mm
    cube_half: float  # cube half-extent, mm
    intrinsics: CameraIntrinsics

    # -- normalized [0,1]x[0,1]x[-1,1] <-> original image (col, row, z mm) --
    def normalized_to_image_uvz(self, pose):
        pose = np.asarray(pose, dtype=np.float64)
        col0, row0, width, height = self.window
        out = np.empty_like(pose)
        out[..., 0] = col0 + pose[..., 0] * width
        out[..., 1] = row0 + pose[..., 1] * height
        out[..., 2] = self.center_z + pose[..., 2] * self.cube_half
        return out

    def image_uvz_to_normalized(self, uvz):
        uvz = np.asarray(uvz, dtype=np.float64)
        col0, row0, width, height = self.window
        out = np.empty_like(uvz)
        out[..., 0] = (uvz[..., 0] - col0) / width
        out[..., 1] = (uvz[..., 1] - row0) / height
        out[..., 2] = (uvz[..., 2] - self.center_z) / self.cube_half
        return out

    def normalized_to_world(self, pose):
        return uvz_to_xyz(self.normalized_to_image_uvz(pose), self.intrinsics)

    def world_to_normalized(self, xyz):
        return self.image_uvz_to_normalized(xyz_to_uvz(xyz, self.intrinsics))


@dataclass
class Sample:
    """A frame with its normalized and world-space ground truth."""

    frame: DepthFrame
    pose: np.ndarray  # (N, 3) normalized crop-local UVZ
    pose_world: np.ndarray  # (N, 3) world mm

    @property
    def n_joints(self):
        return self.pose.shape[0]

    def check_consistency(self, tol_mm=1e-3):
        back = self.frame.normalized_to_world(self.pose)
        err = np.abs(back - self.pose_world).max()
        if err > tol_mm:
            raise ValidationError(
                f"pose/pose_world disagree by {err:.2e} mm (tolerance {tol_mm})"
            )


def crop_and_normalize(depth_mm, center_world, cube_half, intrinsics, out_size=96):
    """Extract the cube-projected window around the hand and normalize it.

    ``depth_mm`` is the raw (H, W) depth image in millimeters with 0 marking
    missing measurements; ``center_world`` the crop center in world mm.
    Resampling is nearest-neighbor so foreground and background never mix.
    """
    depth_mm = np.asarray(depth_mm, dtype=np.float64)
    if depth_mm.ndim != 2:
        raise ShapeError(f"depth image must be 2-D, got shape {depth_mm.shape}")
    if cube_half <= 0:
        raise ValidationError(f"cube half-extent must be positive, got {cube_half}")
    center = np.asarray(center_world, dtype=np.float64)
    cz = float(center[2])
    if cz <= 0:
        raise DataError(f"crop center depth must be positive, got {cz}")
    cu, cv, _ = xyz_to_uvz(center, intrinsics)
    h_img, w_img = depth_mm.shape
    if not (0 <= cu < w_img and 0 <= cv < h_img):
        raise DataError(f"hand center projects outside the image: ({cu:.1f}, {cv:.1f})")

    half_w = intrinsics.fx * cube_half / cz
    half_h = intrinsics.fy * cube_half / cz
    window = (cu - half_w, cv - half_h, 2.0 * half_w, 2.0 * half_h)

    # nearest-neighbor lookup at output pixel centers
    centers = (np.arange(out_size) + 0.5) / out_size
    src_cols = np.floor(window[0] + centers * window[2]).astype(int)
    src_rows = np.floor(window[1] + centers * window[3]).astype(int)
    in_c = (src_cols >= 0) & (src_cols < w_img)
    in_r = (src_rows >= 0) & (src_rows < h_img)
    cols = np.clip(src_cols, 0, w_img - 1)
    rows = np.clip(src_rows, 0, h_img - 1)
    raw = depth_mm[np.ix_(rows, cols)]
    inside = np.outer(in_r, in_c)

    measured = raw > 0
    in_cube = np.abs(raw - cz) <= cube_half
    valid = inside & measured & in_cube
    if not valid.any():
        raise DataError("empty crop: no valid depth pixels inside the cube")

    pixels = np.full((out_size, out_size), FAR_PLANE, dtype=np.float32)
    pixels[valid] = ((raw[valid] - cz) / cube_half).astype(np.float32)
    return DepthFrame(
        pixels=pixels,
        valid=valid,
        window=window,
        center_z=cz,
        cube_half=float(cube_half),
        intrinsics=intrinsics,
    )
