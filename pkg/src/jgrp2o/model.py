"""The full stacked network: stem, per-stage hourglass + reasoning + offsets.

Each stage emits its own pose estimate; training supervises all of them,
inference reads the last. The voting tensor a stage produces is the one
object used for pixel-to-joint voting, joint-to-pixel mapping, and offset
aggregation within that stage.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import topology
from .backbone import BackboneConfig, Stem, StageBackbone, StageInput
from .errors import ValidationError
from .graph_reasoning import JointGraphReasoning
from .layers import Conv2d
from .numerics import SINGLE, WIDE, ParamStore, constant
from .offsets import aggregate_joints, predict_offsets


@dataclass(frozen=True)
class ModelConfig:
    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    joints: int = 14
    graph: str = "skeleton"
    topology: str = "synth14"
    jgr_enabled: bool = True
    precision: str = "single"

    def __post_init__(self):
        if self.precision not in ("single", "wide"):
            raise ValidationError(f"precision must be single|wide, got {self.precision!r}")
        if self.joints < 1:
            raise ValidationError(f"joints must be >= 1, got {self.joints}")

    @property
    def dtype(self):
        return WIDE if self.precision == "wide" else SINGLE


@dataclass
class StageOutput:
    """Everything one stage produces (tape tensors)."""

    voting: object  # (B, H, W, N)
    offsets: object  # (B, H, W, 3N)
    pose: object  # (B, N, 3)
    fused: object  # (B, H, W, C)
    joint_feats: object = None  # (B, N, C) when reasoning is enabled
    evolved_feats: object = None


class _Stage:
    def __init__(self, store, name, cfg: ModelConfig, edges, rng, first):
        c = cfg.backbone.channels
        self.backbone = StageBackbone(store, f"{name}/backbone", cfg.backbone, rng)
        self.stage_input = None if first else StageInput(store, f"{name}/input", c, rng)
        self.jgr = (
            JointGraphReasoning(
                store, f"{name}/jgr", c, cfg.joints, cfg.graph, edges, rng
            )
            if cfg.jgr_enabled
            else None
        )
        self.offset_head = Conv2d(
            store, f"{name}/offset_head", 1, 1, c, 3 * cfg.joints, rng
        )


class HandPoseNet:
    def __init__(self, cfg: ModelConfig, seed=0):
        n_topo, edges = topology.resolve(cfg.topology)
        if n_topo != cfg.joints:
            raise ValidationError(
                f"topology {cfg.topology!r} has {n_topo} joints, config says {cfg.joints}"
            )
        self.cfg = cfg
        self.edges = edges
        self.store = ParamStore(dtype=cfg.dtype)
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0xA11]))
        self.stem = Stem(self.store, "stem", cfg.backbone, rng)
        self.stages = [
            _Stage(self.store, f"stage{s + 1}", cfg, edges, rng, first=(s == 0))
            for s in range(cfg.backbone.stages)
        ]

    # ------------------------------------------------------------------
    def forward(self, images, grids, training=False):
        """Run all stages.

        ``images``: (B, input, input, 1) array; ``grids``: (B, H, W, 3) pixel
        coordinates at feature resolution. Returns a list of StageOutput.
        """
        dtype = self.cfg.dtype
        x = constant(np.asarray(images), dtype=dtype)
        grids = np.asarray(grids, dtype=dtype)
        n = self.cfg.joints
        stem_feats = self.stem(x, training)

        outputs = []
        prev_fused = None
        for stage in self.stages:
            feats_in = (
                stem_feats
                if stage.stage_input is None
                else stage.stage_input(stem_feats, prev_fused)
            )
            local = stage.backbone(feats_in, training)
            if stage.jgr is not None:
                voting, joint_feats, evolved, fused = stage.jgr(local, training)
            else:
                # reasoning disabled: plain average over all pixels
                b, h, w, _ = local.shape
                voting = constant(
                    np.full((b, h, w, n), 1.0 / (h * w), dtype=dtype)
                )
                joint_feats = evolved = None
                fused = local
            offset_maps = predict_offsets(fused, stage.offset_head)
            pose = aggregate_joints(offset_maps, grids, voting)
            outputs.append(
                StageOutput(
                    voting=voting,
                    offsets=offset_maps,
                    pose=pose,
                    fused=fused,
                    joint_feats=joint_feats,
                    evolved_feats=evolved,
                )
            )
            prev_fused = fused
        return outputs

    def predict(self, images, grids):
        """Eval-mode pose from the final stage, as a plain array."""
        return self.forward(images, grids, training=False)[-1].pose.data.copy()

    # ------------------------------------------------------------------
    def count_params(self):
        """Exact scalar count of all trainable entries."""
        return self.store.total_scalars()

    def param_breakdown(self):
        return self.store.count_by_prefix(depth=2)


def count_params(cfg: ModelConfig):
    """Parameter count for a configuration (builds the model once)."""
    return HandPoseNet(cfg, seed=0).count_params()
