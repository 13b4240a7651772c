"""Hourglass feature extractor.

The stem downsamples the input depth image to the working feature
resolution; each stage then runs a symmetric encoder/decoder hourglass
with skip connections at every level. Stages after the first receive the
stem features plus a 1x1 remap of the previous stage's fused feature map.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ShapeError, ValidationError
from .layers import Conv2d, ConvBnRelu, ResidualBlock
from .numerics import ops


@dataclass(frozen=True)
class BackboneConfig:
    input_size: int = 96
    feature_size: int = 24
    channels: int = 128
    depth: int = 2
    stages: int = 2
    pool: str = "max"

    def __post_init__(self):
        if self.input_size % self.feature_size or not _is_pow2(
            self.input_size // self.feature_size
        ):
            raise ValidationError(
                f"input_size/feature_size must be a power of two, got "
                f"{self.input_size}/{self.feature_size}"
            )
        if self.feature_size % (2**self.depth):
            raise ValidationError(
                f"feature_size {self.feature_size} not divisible by 2^depth={2**self.depth}"
            )
        if self.stages < 1:
            raise ValidationError(f"stages must be >= 1, got {self.stages}")
        if self.pool not in ("max", "avg"):
            raise ValidationError(f"pool must be 'max' or 'avg', got {self.pool!r}")

    @property
    def n_pools(self):
        return (self.input_size // self.feature_size).bit_length() - 1


def _is_pow2(n):
    return n >= 1 and (n & (n - 1)) == 0


def _pool_op(kind):
    return ops.max_pool2 if kind == "max" else ops.avg_pool2


class Stem:
    """Input image -> feature map: 5x5 conv, then pool/residual ladder."""

    def __init__(self, store, name, cfg: BackboneConfig, rng):
        self.cfg = cfg
        n_pools = cfg.n_pools
        widths = [max(cfg.channels >> (n_pools - i), 1) for i in range(n_pools + 1)]
        self.entry = ConvBnRelu(store, f"{name}/entry", 5, 5, 1, widths[0], rng)
        self.blocks = []
        prev = widths[0]
        for i in range(n_pools):
            blk = ResidualBlock(store, f"{name}/res{i + 1}", prev, widths[i + 1], rng)
            self.blocks.append(blk)
            prev = widths[i + 1]
        self.final = ResidualBlock(store, f"{name}/res_out", prev, cfg.channels, rng)
        self.pool = _pool_op(cfg.pool)

    def __call__(self, x, training):
        if x.shape[1] != self.cfg.input_size or x.shape[2] != self.cfg.input_size:
            raise ShapeError(
                f"stem expects {self.cfg.input_size}x{self.cfg.input_size} input, "
                f"got {x.shape[1]}x{x.shape[2]}"
            )
        h = self.entry(x, training)
        for blk in self.blocks:
            h = blk(h, training)
            h = self.pool(h)
        return self.final(h, training)


class Hourglass:
    """Recursive encoder/decoder with a residual skip at every level."""

    def __init__(self, store, name, depth, channels, rng, pool="max"):
        self.depth = depth
        self.pool = _pool_op(pool)
        c = channels
        if depth == 0:
            # degenerate form: a single residual block
            self.body = ResidualBlock(store, f"{name}/res", c, c, rng)
            return
        self.skip = ResidualBlock(store, f"{name}/skip", c, c, rng)
        self.down = ResidualBlock(store, f"{name}/down", c, c, rng)
        self.inner = Hourglass(store, f"{name}/inner", depth - 1, c, rng, pool)
        self.up = ResidualBlock(store, f"{name}/up", c, c, rng)

    def __call__(self, x, training):
        if self.depth == 0:
            return self.body(x, training)
        if x.shape[1] % 2 or x.shape[2] % 2:
            raise ShapeError(
                f"hourglass level needs even spatial dims, got {x.shape[1]}x{x.shape[2]}"
            )
        identity = self.skip(x, training)
        low = self.down(self.pool(x), training)
        low = self.inner(low, training)
        low = self.up(low, training)
        return ops.add(identity, ops.upsample2(low))


class StageBackbone:
    """One stage: hourglass plus a post block producing the local features."""

    def __init__(self, store, name, cfg: BackboneConfig, rng):
        c = cfg.channels
        self.hourglass = Hourglass(store, f"{name}/hg", cfg.depth, c, rng, cfg.pool)
        self.post_res = ResidualBlock(store, f"{name}/post_res", c, c, rng)
        self.post = ConvBnRelu(store, f"{name}/post", 1, 1, c, c, rng)

    def __call__(self, x, training):
        h = self.hourglass(x, training)
        h = self.post_res(h, training)
        return self.post(h, training)


class StageInput:
    """Remap of the previous stage's fused features, added to the stem output."""

    def __init__(self, store, name, channels, rng):
        self.remap = Conv2d(store, f"{name}/remap", 1, 1, channels, channels, rng)

    def __call__(self, stem_features, prev_fused):
        return ops.add(stem_features, self.remap(prev_fused))
