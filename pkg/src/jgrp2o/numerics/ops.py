"""Differentiable primitives over the backward tape.

Every function takes and returns :class:`~jgrp2o.numerics.tensor.Tensor`
nodes. Forward values are plain numpy; each op installs a ``push`` closure
that routes the output gradient to its parents. Inputs are never mutated,
so repeated evaluation of the same graph is bit-identical.

Layout convention for rank-4 activations: (batch, height, width, channel).
Convolution kernels are (kh, kw, c_in, c_out).
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeError
from .tensor import Tensor


def _unbroadcast(g, shape):
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a, b):
    out = Tensor(a.data + b.data, (a, b))

    def push(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g, b.shape))

    out.push = push
    return out


def sub(a, b):
    out = Tensor(a.data - b.data, (a, b))

    def push(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(-g, b.shape))

    out.push = push
    return out


def mul(a, b):
    out = Tensor(a.data * b.data, (a, b))

    def push(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g * a.data, b.shape))

    out.push = push
    return out


def scale(x, s):
    """Multiply by a python scalar."""
    out = Tensor(x.data * s, (x,))

    def push(g):
        if x.requires_grad:
            x.accumulate(g * s)

    out.push = push
    return out


def relu(x):
    """max(0, x); the subgradient at exactly 0 is taken as 0."""
    out = Tensor(np.maximum(x.data, 0), (x,))

    def push(g):
        if x.requires_grad:
            x.accumulate(g * (x.data > 0))

    out.push = push
    return out


def huber(x, delta):
    """Elementwise Huber penalty: quadratic inside |x| <= delta, linear outside."""
    if delta <= 0:
        raise ShapeError(f"huber delta must be positive, got {delta}")
    ax = np.abs(x.data)
    quad = 0.5 * x.data * x.data
    lin = delta * (ax - 0.5 * delta)
    out = Tensor(np.where(ax <= delta, quad, lin), (x,))

    def push(g):
        if x.requires_grad:
            # derivative is x clamped to [-delta, delta]
            x.accumulate(g * np.clip(x.data, -delta, delta))

    out.push = push
    return out


def sum_all(x):
    """Sum of every element, as a 0-d tensor."""
    out = Tensor(np.asarray(x.data.sum()), (x,))

    def push(g):
        if x.requires_grad:
            x.accumulate(np.broadcast_to(g, x.shape))

    out.push = push
    return out


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a, b):
    """Dense product with numpy matmul semantics (leading axes broadcast)."""
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError("matmul operands must have at least 2 axes")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dims disagree: {a.shape} x {b.shape}")
    out = Tensor(a.data @ b.data, (a, b))

    def push(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape))

    out.push = push
    return out


def einsum2(eq, a, b):
    """Two-operand einsum whose adjoint is another einsum.

    Requires every input index to appear in the output or in the other
    operand (true for all contractions used in this package), so that
    d/da = einsum(out,b->a) and d/db = einsum(out,a->b).
    """
    ins, out_spec = eq.replace(" ", "").split("->")
    sa, sb = ins.split(",")
    for spec, other in ((sa, sb), (sb, sa)):
        missing = set(spec) - set(out_spec) - set(other)
        if missing:
            raise ShapeError(f"einsum2 cannot differentiate {eq!r}: index {missing}")
    out = Tensor(np.einsum(eq, a.data, b.data), (a, b))

    def push(g):
        if a.requires_grad:
            a.accumulate(np.einsum(f"{out_spec},{sb}->{sa}", g, b.data))
        if b.requires_grad:
            b.accumulate(np.einsum(f"{out_spec},{sa}->{sb}", g, a.data))

    out.push = push
    return out


# ---------------------------------------------------------------------------
# convolution


def _same_pad(n, k, stride):
    out = -(-n // stride)  # ceil
    total = max((out - 1) * stride + k - n, 0)
    return out, total // 2, total - total // 2


def conv2d(x, kernel, bias=None, stride=1, padding="same"):
    """Cross-correlation of a (B,H,W,Cin) tensor with a (kh,kw,Cin,Cout) kernel."""
    if x.ndim != 4 or kernel.ndim != 4:
        raise ShapeError(f"conv2d needs rank-4 input/kernel, got {x.shape}/{kernel.shape}")
    if stride < 1:
        raise ShapeError(f"conv2d stride must be >= 1, got {stride}")
    B, H, W, cin = x.shape
    kh, kw, kcin, cout = kernel.shape
    if kcin != cin:
        raise ShapeError(f"conv2d channel mismatch: input {cin}, kernel {kcin}")
    if bias is not None and bias.shape != (cout,):
        raise ShapeError(f"conv2d bias shape {bias.shape} != ({cout},)")

    if padding == "same":
        out_h, pt, pb = _same_pad(H, kh, stride)
        out_w, pl, pr = _same_pad(W, kw, stride)
    elif padding == "valid":
        out_h = (H - kh) // stride + 1
        out_w = (W - kw) // stride + 1
        pt = pb = pl = pr = 0
    else:
        raise ShapeError(f"unknown padding {padding!r}")
    if out_h <= 0 or out_w <= 0:
        raise ShapeError(f"conv2d output would be {out_h}x{out_w} for input {H}x{W}")

    if kh == 1 and kw == 1 and stride == 1:
        # 1x1 fast path: a channel matmul, no patch extraction
        kmat = kernel.data.reshape(cin, cout)
        y = x.data @ kmat
        if bias is not None:
            y = y + bias.data
        out = Tensor(y, (x, kernel) if bias is None else (x, kernel, bias))

        def push(g):
            if kernel.requires_grad:
                kernel.accumulate(
                    np.einsum("bhwc,bhwo->co", x.data, g).reshape(kernel.shape)
                )
            if bias is not None and bias.requires_grad:
                bias.accumulate(g.sum(axis=(0, 1, 2)))
            if x.requires_grad:
                x.accumulate(g @ kmat.T)

        out.push = push
        return out

    xp = np.pad(x.data, ((0, 0), (pt, pb), (pl, pr), (0, 0)))
    windows = sliding_window_view(xp, (kh, kw), axis=(1, 2))[:, ::stride, ::stride]
    # windows: (B, out_h, out_w, Cin, kh, kw); flatten patch axes Cin-major to
    # match the (Cin, kh, kw) ordering of the reshaped kernel
    cols = np.ascontiguousarray(windows).reshape(B, out_h, out_w, cin * kh * kw)
    kmat = kernel.data.transpose(2, 0, 1, 3).reshape(cin * kh * kw, cout)
    y = cols @ kmat
    if bias is not None:
        y = y + bias.data
    out = Tensor(y, (x, kernel) if bias is None else (x, kernel, bias))

    def push(g):
        if kernel.requires_grad:
            gk = np.einsum("bhwp,bhwo->po", cols, g)
            kernel.accumulate(gk.reshape(cin, kh, kw, cout).transpose(1, 2, 0, 3))
        if bias is not None and bias.requires_grad:
            bias.accumulate(g.sum(axis=(0, 1, 2)))
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    gxp[
                        :,
                        i : i + out_h * stride : stride,
                        j : j + out_w * stride : stride,
                        :,
                    ] += g @ kernel.data[i, j].T
            x.accumulate(gxp[:, pt : pt + H, pl : pl + W, :])

    out.push = push
    return out


# ---------------------------------------------------------------------------
# pooling / resampling


def _check_even_spatial(x, opname):
    B, H, W, C = x.shape
    if H % 2 or W % 2:
        raise ShapeError(f"{opname} needs even spatial dims, got {H}x{W}")
    return B, H, W, C


def avg_pool2(x):
    """Non-overlapping 2x2 mean pooling."""
    B, H, W, C = _check_even_spatial(x, "avg_pool2")
    blocks = x.data.reshape(B, H // 2, 2, W // 2, 2, C)
    out = Tensor(blocks.mean(axis=(2, 4)), (x,))

    def push(g):
        if x.requires_grad:
            x.accumulate(np.repeat(np.repeat(g, 2, axis=1), 2, axis=2) * 0.25)

    out.push = push
    return out


def max_pool2(x):
    """Non-overlapping 2x2 max pooling; ties route the gradient to the first max."""
    B, H, W, C = _check_even_spatial(x, "max_pool2")
    windows = (
        x.data.reshape(B, H // 2, 2, W // 2, 2, C)
        .transpose(0, 1, 3, 2, 4, 5)
        .reshape(B, H // 2, W // 2, 4, C)
    )
    idx = windows.argmax(axis=3)
    y = np.take_along_axis(windows, idx[:, :, :, None, :], axis=3).squeeze(3)
    out = Tensor(y, (x,))

    def push(g):
        if x.requires_grad:
            gw = np.zeros_like(windows)
            np.put_along_axis(gw, idx[:, :, :, None, :], g[:, :, :, None, :], axis=3)
            x.accumulate(
                gw.reshape(B, H // 2, W // 2, 2, 2, C)
                .transpose(0, 1, 3, 2, 4, 5)
                .reshape(B, H, W, C)
            )

    out.push = push
    return out


def upsample2(x):
    """Nearest-neighbor 2x upsampling; backward is the exact adjoint (block sum)."""
    B, H, W, C = x.shape
    out = Tensor(np.repeat(np.repeat(x.data, 2, axis=1), 2, axis=2), (x,))

    def push(g):
        if x.requires_grad:
            x.accumulate(g.reshape(B, H, 2, W, 2, C).sum(axis=(2, 4)))

    out.push = push
    return out


def concat_channels(a, b):
    """Concatenate two rank-4 tensors along the channel axis."""
    if a.shape[:3] != b.shape[:3]:
        raise ShapeError(f"concat_channels spatial mismatch: {a.shape} vs {b.shape}")
    ca = a.shape[3]
    out = Tensor(np.concatenate([a.data, b.data], axis=3), (a, b))

    def push(g):
        if a.requires_grad:
            a.accumulate(g[..., :ca])
        if b.requires_grad:
            b.accumulate(g[..., ca:])

    out.push = push
    return out


# ---------------------------------------------------------------------------
# normalization


def spatial_softmax(x):
    """Exp-normalize each (batch, channel) slice over all H*W positions."""
    if x.ndim != 4:
        raise ShapeError(f"spatial_softmax needs a rank-4 tensor, got {x.shape}")
    m = x.data.max(axis=(1, 2), keepdims=True)
    e = np.exp(x.data - m)
    w = e / e.sum(axis=(1, 2), keepdims=True)
    out = Tensor(w, (x,))

    def push(g):
        if x.requires_grad:
            dot = (g * w).sum(axis=(1, 2), keepdims=True)
            x.accumulate(w * (g - dot))

    out.push = push
    return out


def softmax_last(x):
    """Softmax along the trailing axis."""
    m = x.data.max(axis=-1, keepdims=True)
    e = np.exp(x.data - m)
    w = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(w, (x,))

    def push(g):
        if x.requires_grad:
            dot = (g * w).sum(axis=-1, keepdims=True)
            x.accumulate(w * (g - dot))

    out.push = push
    return out


class RunningStats:
    """Per-channel running mean/variance buffers for batch normalization."""

    __slots__ = ("mean", "var")

    def __init__(self, channels, dtype):
        self.mean = np.zeros(channels, dtype=dtype)
        self.var = np.ones(channels, dtype=dtype)


def batch_norm(x, bn_scale, bn_shift, stats, training, momentum=0.9, eps=1e-5):
    """Batch normalization over (B, H, W) per channel.

    Train mode normalizes with the current batch statistics and updates
    ``stats`` in place by exponential moving average; eval mode reads
    ``stats`` only. Biased (ddof=0) variance is used throughout.
    """
    C = x.shape[-1]
    if bn_scale.shape != (C,) or bn_shift.shape != (C,):
        raise ShapeError(
            f"batch_norm channel mismatch: input C={C}, "
            f"scale {bn_scale.shape}, shift {bn_shift.shape}"
        )
    axes = tuple(range(x.ndim - 1))
    if training:
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        stats.mean = (momentum * stats.mean + (1.0 - momentum) * mu).astype(
            stats.mean.dtype
        )
        stats.var = (momentum * stats.var + (1.0 - momentum) * var).astype(
            stats.var.dtype
        )
    else:
        mu = stats.mean
        var = stats.var
    ivar = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * ivar
    out = Tensor(bn_scale.data * xhat + bn_shift.data, (x, bn_scale, bn_shift))
    m = x.data.size // C

    def push(g):
        if bn_scale.requires_grad:
            bn_scale.accumulate((g * xhat).sum(axis=axes))
        if bn_shift.requires_grad:
            bn_shift.accumulate(g.sum(axis=axes))
        if x.requires_grad:
            gh = g * bn_scale.data
            if training:
                # gradient through the batch statistics
                x.accumulate(
                    ivar
                    / m
                    * (
                        m * gh
                        - gh.sum(axis=axes)
                        - xhat * (gh * xhat).sum(axis=axes)
                    )
                )
            else:
                x.accumulate(gh * ivar)

    out.push = push
    return out
