"""Small layer wrappers that register their weights in a ParamStore."""

from __future__ import annotations

import numpy as np

from .numerics import ops


class Conv2d:
    """Conv layer; He-normal kernel init, zero bias. Bias is decay-exempt."""

    def __init__(self, store, name, kh, kw, cin, cout, rng, bias=True,
                 stride=1, padding="same"):
        std = np.sqrt(2.0 / (kh * kw * cin))
        self.kernel = store.create(
            f"{name}/kernel", rng.normal(0.0, std, (kh, kw, cin, cout))
        )
        self.bias = (
            store.create(f"{name}/bias", np.zeros(cout), decay=False) if bias else None
        )
        self.stride = stride
        self.padding = padding

    def __call__(self, x):
        return ops.conv2d(x, self.kernel, self.bias, self.stride, self.padding)


class BatchNorm2d:
    def __init__(self, store, name, channels, momentum=0.9, eps=1e-5):
        self.scale = store.create(f"{name}/scale", np.ones(channels), decay=False)
        self.shift = store.create(f"{name}/shift", np.zeros(channels), decay=False)
        self.stats = store.create_stats(name, channels)
        self.momentum = momentum
        self.eps = eps

    def __call__(self, x, training):
        return ops.batch_norm(
            x, self.scale, self.shift, self.stats, training, self.momentum, self.eps
        )


class Linear:
    """Matrix map on the trailing axis; Glorot-uniform init."""

    def __init__(self, store, name, cin, cout, rng, bias=False):
        limit = np.sqrt(6.0 / (cin + cout))
        self.weight = store.create(
            f"{name}/weight", rng.uniform(-limit, limit, (cin, cout))
        )
        self.bias = (
            store.create(f"{name}/bias", np.zeros(cout), decay=False) if bias else None
        )

    def __call__(self, x):
        y = ops.matmul(x, self.weight)
        if self.bias is not None:
            y = ops.add(y, self.bias)
        return y


class ConvBnRelu:
    """The C block: convolution with batch norm and ReLU."""

    def __init__(self, store, name, kh, kw, cin, cout, rng, stride=1):
        self.conv = Conv2d(store, f"{name}/conv", kh, kw, cin, cout, rng,
                           bias=False, stride=stride)
        self.bn = BatchNorm2d(store, f"{name}/bn", cout)

    def __call__(self, x, training):
        return ops.relu(self.bn(self.conv(x), training))


class ResidualBlock:
    """Pre-activation bottleneck: BN-ReLU-1x1, BN-ReLU-3x3, BN-ReLU-1x1 + skip.

    The bottleneck width is half the output channel count; a 1x1 projection
    is added on the skip path only when the channel count changes.
    """

    def __init__(self, store, name, cin, cout, rng):
        mid = max(cout // 2, 1)
        self.bn1 = BatchNorm2d(store, f"{name}/bn1", cin)
        self.conv1 = Conv2d(store, f"{name}/conv1", 1, 1, cin, mid, rng, bias=False)
        self.bn2 = BatchNorm2d(store, f"{name}/bn2", mid)
        self.conv2 = Conv2d(store, f"{name}/conv2", 3, 3, mid, mid, rng, bias=False)
        self.bn3 = BatchNorm2d(store, f"{name}/bn3", mid)
        self.conv3 = Conv2d(store, f"{name}/conv3", 1, 1, mid, cout, rng, bias=False)
        self.proj = (
            Conv2d(store, f"{name}/proj", 1, 1, cin, cout, rng, bias=False)
            if cin != cout
            else None
        )

    def __call__(self, x, training):
        h = self.conv1(ops.relu(self.bn1(x, training)))
        h = self.conv2(ops.relu(self.bn2(h, training)))
        h = self.conv3(ops.relu(self.bn3(h, training)))
        skip = x if self.proj is None else self.proj(x)
        return ops.add(skip, h)
