"""Pixel-to-offset prediction and joint aggregation.

For every pixel of the feature map the head predicts one (du, dv, dz)
offset triple per joint; joint coordinates are the vote-weighted average
of (pixel coordinate + offset) over all pixels. Offset channels are
joint-major: (du_1, dv_1, dz_1, ..., du_N, dv_N, dz_N).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, ShapeError
from .numerics import Tensor

# Per-joint voting weights must sum to 1 over the map; aggregation refuses
# anything farther from 1 than this.
WEIGHT_SUM_TOL = 1e-4

# Background grid cells sit at the normalized far plane.
FAR_PLANE = 1.0


@dataclass(frozen=True)
class CoordinateGrid:
    """Per-pixel normalized (u, v, z) at offset-map resolution."""

    coords: np.ndarray  # (H, W, 3)
    valid: np.ndarray  # (H, W) bool


def predict_offsets(x, head_conv):
    """Dense 3N offset maps from the fused features; a plain 1x1 conv."""
    return head_conv(x)


def make_coordinate_grid(frame, resolution):
    """Downsample a depth frame to the offset-map resolution.

    u and v are pixel centers in [0, 1]; z is the mean normalized depth of
    the valid pixels in each block, or the far plane where a block has none.
    """
    pixels = frame.pixels
    valid = frame.valid
    size = pixels.shape[0]
    if pixels.shape[0] != pixels.shape[1]:
        raise ShapeError(f"expected a square frame, got {pixels.shape}")
    if size % resolution != 0:
        raise ShapeError(f"resolution {resolution} does not divide frame size {size}")
    block = size // resolution

    centers = (np.arange(resolution) + 0.5) / resolution
    u = np.broadcast_to(centers[None, :], (resolution, resolution))
    v = np.broadcast_to(centers[:, None], (resolution, resolution))

    blocks = pixels.reshape(resolution, block, resolution, block)
    vmask = valid.reshape(resolution, block, resolution, block)
    counts = vmask.sum(axis=(1, 3))
    sums = (blocks * vmask).sum(axis=(1, 3))
    z = np.full((resolution, resolution), FAR_PLANE, dtype=np.float64)
    nonzero = counts > 0
    z[nonzero] = sums[nonzero] / counts[nonzero]

    coords = np.stack([u, v, z], axis=-1)
    return CoordinateGrid(coords=coords, valid=nonzero)


def aggregate_joints(offset_maps, grid, weights):
    """Vote-weighted average of per-pixel joint predictions (differentiable).

    ``offset_maps`` is a (B,H,W,3N) tensor, ``grid`` a (B,H,W,3) array of
    pixel coordinates, ``weights`` the (B,H,W,N) voting tensor. Returns the
    (B,N,3) pose.
    """
    B, H, W, cn = offset_maps.shape
    if cn % 3 != 0:
        raise ShapeError(f"offset maps need 3N channels, got {cn}")
    n = cn // 3
    if weights.shape != (B, H, W, n):
        raise ShapeError(
            f"voting weights {weights.shape} do not match offsets {offset_maps.shape}"
        )
    if grid.shape != (B, H, W, 3):
        raise ShapeError(f"grid shape {grid.shape} != {(B, H, W, 3)}")

    sums = weights.data.sum(axis=(1, 2))
    err = np.abs(sums - 1.0).max()
    if err > WEIGHT_SUM_TOL:
        raise ContractViolation(
            f"voting weights not normalized: worst per-joint sum deviates by {err:.3g}"
        )

    per_pixel = offset_maps.data.reshape(B, H, W, n, 3) + grid[:, :, :, None, :]
    pose = np.einsum("bhwk,bhwka->bka", weights.data, per_pixel)
    out = Tensor(pose, (offset_maps, weights))

    def push(g):
        if weights.requires_grad:
            weights.accumulate(np.einsum("bka,bhwka->bhwk", g, per_pixel))
        if offset_maps.requires_grad:
            goff = np.einsum("bhwk,bka->bhwka", weights.data, g)
            offset_maps.accumulate(goff.reshape(B, H, W, cn))

    out.push = push
    return out


def compute_offset_targets(pose_gt, grid):
    """Ground-truth offsets: joint coordinate minus pixel coordinate, per pixel.

    ``pose_gt`` is (B,N,3) normalized, ``grid`` (B,H,W,3). The result is the
    (B,H,W,3N) target array; u/v entries lie in [-1, 1], z entries may reach
    [-2, 2] where far-plane background votes for a near joint. They are left
    unclamped so that aggregation reproduces the pose exactly.
    """
    B, n, three = pose_gt.shape
    if three != 3:
        raise ShapeError(f"pose must be (B,N,3), got {pose_gt.shape}")
    diff = pose_gt[:, None, None, :, :] - grid[:, :, :, None, :]
    H, W = grid.shape[1], grid.shape[2]
    return diff.reshape(B, H, W, 3 * n)
