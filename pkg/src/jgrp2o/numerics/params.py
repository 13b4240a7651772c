"""Named parameter registry.

All trainable arrays of a model live in one ``ParamStore`` under slash-path
names ("stage1/jgr/vote/kernel"). Gradients accumulate on the parameters
themselves; the store only provides creation, lookup, counting and bulk
zeroing. Batch-norm running statistics are registered separately as
non-trainable buffers so checkpoints can carry them.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError, ValidationError
from .ops import RunningStats
from .tensor import Parameter


class ParamStore:
    def __init__(self, dtype=np.float32):
        self.dtype = np.dtype(dtype)
        self._params: dict[str, Parameter] = {}
        self._stats: dict[str, RunningStats] = {}

    def create(self, name, values, decay=True):
        """Register a new parameter initialized with ``values``."""
        if name in self._params:
            raise ValidationError(f"duplicate parameter name {name!r}")
        p = Parameter(np.asarray(values, dtype=self.dtype), name, decay=decay)
        self._params[name] = p
        return p

    def create_stats(self, name, channels):
        if name in self._stats:
            raise ValidationError(f"duplicate buffer name {name!r}")
        st = RunningStats(channels, self.dtype)
        self._stats[name] = st
        return st

    def __getitem__(self, name):
        return self._params[name]

    def __contains__(self, name):
        return name in self._params

    def parameters(self):
        return list(self._params.values())

    def named_parameters(self):
        return list(self._params.items())

    def named_stats(self):
        return list(self._stats.items())

    def total_scalars(self):
        return sum(p.size for p in self._params.values())

    def count_by_prefix(self, depth=2):
        """Scalar counts grouped by the first ``depth`` path segments."""
        groups: dict[str, int] = {}
        for name, p in self._params.items():
            key = "/".join(name.split("/")[:depth])
            groups[key] = groups.get(key, 0) + p.size
        return groups

    def zero_grads(self):
        for p in self._params.values():
            p.grad = None

    def load_values(self, arrays):
        """Overwrite parameter values from a name->array mapping (full cover required)."""
        missing = set(self._params) - set(arrays)
        extra = set(arrays) - set(self._params)
        if missing or extra:
            raise ValidationError(
                f"parameter set mismatch: missing {sorted(missing)[:3]}, "
                f"unexpected {sorted(extra)[:3]}"
            )
        for name, arr in arrays.items():
            p = self._params[name]
            if tuple(arr.shape) != tuple(p.shape):
                raise ShapeError(
                    f"shape mismatch for {name!r}: stored {arr.shape}, model {p.shape}"
                )
            p.data = np.asarray(arr, dtype=self.dtype).copy()
