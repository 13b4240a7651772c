"""Wiring for the end-to-end gradient fidelity check.

The checker compares reverse-mode gradients of the full training objective
(all stages, both loss terms, eval-mode normalization) against central
finite differences. Finite differences are only trustworthy at a
well-conditioned point, so the harness prepares one:

- every parameter is jittered off its init (no activation sits exactly on
  a ReLU kink, no batch-norm shift is exactly zero);
- the vote and offset-head kernels are scaled down so all stage poses live
  near the grid centroid, and ground truth is drawn near the mean
  prediction. Residuals then stay tiny and quadratic, which keeps the
  objective value (and with it the f(x+h)-f(x-h) cancellation noise)
  orders of magnitude below the pass tolerance.

Every parameter still influences the objective, so the check covers the
complete gradient of the network.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .model import HandPoseNet, ModelConfig
from .numerics.gradcheck import grad_check
from .objective import LossConfig, total_loss

JITTER_SCALE = 0.05
HEAD_SCALE = 0.05
RESIDUAL_SCALE = 0.02


def jitter_params(store, rng, scale=JITTER_SCALE):
    """Move every parameter off its (possibly degenerate) init point."""
    for p in store.parameters():
        p.data = p.data + rng.normal(0.0, scale, p.shape).astype(p.data.dtype)


def make_grid_batch(batch, resolution, rng=None):
    """A (B, res, res, 3) coordinate grid; z random in [-1, 1] or far plane."""
    centers = (np.arange(resolution) + 0.5) / resolution
    u, v = np.meshgrid(centers, centers, indexing="xy")
    grids = np.empty((batch, resolution, resolution, 3))
    for b in range(batch):
        z = rng.uniform(-1.0, 1.0, (resolution, resolution)) if rng is not None else np.ones(
            (resolution, resolution)
        )
        grids[b] = np.stack([u, v, z], axis=-1)
    return grids


def prepare_check_model(cfg: ModelConfig, seed=0, batch=2):
    """Model at a generic low-loss point plus matched inputs and targets."""
    if cfg.precision != "wide":
        raise ValidationError("gradient checks require precision = wide")
    net = HandPoseNet(cfg, seed=seed)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xC4EC]))
    jitter_params(net.store, rng)
    for name, p in net.store.named_parameters():
        if "/offset_head/" in name or "/vote/" in name:
            p.data = p.data * HEAD_SCALE

    size = cfg.backbone.input_size
    res = cfg.backbone.feature_size
    images = rng.uniform(-1.0, 1.0, (batch, size, size, 1))
    grids = make_grid_batch(batch, res, rng)

    base = net.forward(images, grids, training=False)
    mean_pose = np.mean([o.pose.data for o in base], axis=0)
    gt_pose = mean_pose + rng.uniform(-RESIDUAL_SCALE, RESIDUAL_SCALE, mean_pose.shape)
    mean_offsets = np.mean([o.offsets.data for o in base], axis=0)
    targets = mean_offsets + rng.uniform(
        -RESIDUAL_SCALE, RESIDUAL_SCALE, mean_offsets.shape
    )
    return net, images, grids, gt_pose, targets


def full_network_check(cfg: ModelConfig, loss_cfg: LossConfig, seed=0, step=1e-5,
                       samples_per_entry=200, batch=2, progress=None):
    """Gradient fidelity of the complete stacked network; returns max rel error."""
    net, images, grids, gt_pose, targets = prepare_check_model(cfg, seed, batch)

    def objective(params):
        outs = net.forward(images, grids, training=False)
        return total_loss(
            [o.pose for o in outs], [o.offsets for o in outs], gt_pose, targets, loss_cfg
        ).total

    return grad_check(
        objective,
        net.store,
        step=step,
        seed=seed,
        samples_per_entry=samples_per_entry,
        progress=progress,
    )
