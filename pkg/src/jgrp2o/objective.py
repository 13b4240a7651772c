"""Coordinate and offset regression losses with stacked-stage supervision.

Both losses sum the Huber penalty over joints/pixels/axes as written and
average over the batch only, so the learning-rate meaning is independent
of batch size. The total applies the offset term with a small weight
factor at every stage (intermediate supervision).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ShapeError, ValidationError
from .numerics import constant, ops


@dataclass(frozen=True)
class LossConfig:
    delta: float = 1.0
    beta: float = 0.0001
    stages: int = 2

    def __post_init__(self):
        if self.delta <= 0:
            raise ValidationError(f"huber delta must be > 0, got {self.delta}")
        if self.beta < 0:
            raise ValidationError(f"beta must be >= 0, got {self.beta}")
        if self.stages < 1:
            raise ValidationError(f"stages must be >= 1, got {self.stages}")


@dataclass
class LossReport:
    """Total loss tensor plus per-stage term values (floats)."""

    total: object
    coord: list = field(default_factory=list)
    offset: list = field(default_factory=list)

    @property
    def total_value(self):
        return float(self.total.item())


def huber(x, delta=1.0):
    """Scalar Huber penalty: 0.5 x^2 inside |x| <= delta, linear outside."""
    if delta <= 0:
        raise ValidationError(f"huber delta must be > 0, got {delta}")
    ax = abs(x)
    if ax <= delta:
        return 0.5 * x * x
    return delta * (ax - 0.5 * delta)


def _batch_mean_huber_sum(pred, target_array, delta):
    b = pred.shape[0]
    residual = ops.sub(pred, constant(target_array, dtype=pred.dtype))
    return ops.scale(ops.sum_all(ops.huber(residual, delta)), 1.0 / b)


def coordinate_loss(pred_pose, gt_pose, delta=1.0):
    """Huber sum over joints and axes, averaged over the batch."""
    if pred_pose.shape != gt_pose.shape:
        raise ShapeError(
            f"pose shape mismatch: pred {pred_pose.shape}, gt {gt_pose.shape}"
        )
    return _batch_mean_huber_sum(pred_pose, gt_pose, delta)


def offset_loss(pred_offsets, target_offsets, delta=1.0):
    """Huber sum over joints, pixels and axes, averaged over the batch."""
    if pred_offsets.shape != target_offsets.shape:
        raise ShapeError(
            f"offset shape mismatch: pred {pred_offsets.shape}, "
            f"target {target_offsets.shape}"
        )
    return _batch_mean_huber_sum(pred_offsets, target_offsets, delta)


def total_loss(stage_poses, stage_offsets, gt_pose, offset_targets, cfg: LossConfig):
    """Sum of per-stage coordinate + beta * offset losses over all stages."""
    if len(stage_poses) != cfg.stages or len(stage_offsets) != cfg.stages:
        raise ValidationError(
            f"expected {cfg.stages} stage outputs, got "
            f"{len(stage_poses)} poses / {len(stage_offsets)} offset maps"
        )
    report = LossReport(total=None)
    total = None
    for pose, offs in zip(stage_poses, stage_offsets):
        coord = coordinate_loss(pose, gt_pose, cfg.delta)
        off = offset_loss(offs, offset_targets, cfg.delta)
        report.coord.append(float(coord.item()))
        report.offset.append(float(off.item()))
        term = ops.add(coord, ops.scale(off, cfg.beta))
        total = term if total is None else ops.add(total, term)
    report.total = total
    return report
