"""Reverse-mode tape over dense numpy arrays.

A ``Tensor`` is one node of the computation graph: the forward value plus a
closure that pushes an incoming output gradient to the node's parents. The
graph is built eagerly by the operations in :mod:`jgrp2o.numerics.ops` and
torn down by ordinary garbage collection after ``backward``.

Only the operations the network needs are provided; this is intentionally
not a general autograd system.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError

# Precision modes. Wide precision is used by gradient checks and oracle
# tests, single precision for training.
WIDE = np.float64
SINGLE = np.float32


class Tensor:
    """A node in the backward tape wrapping an ndarray payload."""

    __slots__ = ("data", "grad", "parents", "push", "requires_grad")

    def __init__(self, data, parents=(), push=None, requires_grad=None):
        self.data = data
        self.grad = None
        self.parents = parents
        # push(g) accumulates d(loss)/d(parent) into each parent, given
        # g = d(loss)/d(self). Leaf nodes have push = None.
        self.push = push
        if requires_grad is None:
            requires_grad = any(p.requires_grad for p in parents)
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return self.data.item()

    def accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    def zero_grad(self):
        self.grad = None

    def backward(self):
        """Accumulate gradients of this (scalar) node into every reachable leaf."""
        if self.data.size != 1:
            raise ShapeError(
                f"backward() needs a scalar root, got shape {self.data.shape}"
            )
        order = _toposort(self)
        self.grad = np.ones_like(self.data)
        for node in order:
            if node.push is not None and node.grad is not None:
                node.push(node.grad)
                # interior gradients are not needed after the push; freeing
                # them keeps long training loops lean
                if node is not self:
                    node.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype})"


class Parameter(Tensor):
    """Trainable leaf tensor with a name and a weight-decay eligibility flag."""

    __slots__ = ("name", "decay")

    def __init__(self, data, name, decay=True):
        super().__init__(data, requires_grad=True)
        self.name = name
        self.decay = decay

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.data.shape})"


def _toposort(root):
    """Reverse topological order (root first), iterative to spare the stack."""
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    order.reverse()
    return order


def constant(array, dtype=None):
    """Wrap an ndarray as a non-differentiable leaf."""
    data = np.asarray(array, dtype=dtype)
    return Tensor(data, requires_grad=False)


def as_tensor4(t):
    """Validate the rank-4 (batch, height, width, channel) carrier contract."""
    if t.ndim != 4:
        raise ShapeError(f"expected a rank-4 tensor, got shape {t.shape}")
    return t
