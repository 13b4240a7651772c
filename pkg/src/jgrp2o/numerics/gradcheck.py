"""Central-difference verification of reverse-mode gradients.

The checker treats the model as a black-box scalar function of its
parameter store: it perturbs one scalar at a time and compares the
finite-difference slope against the gradient produced by ``backward``.
Run it in wide precision; single precision drowns the differences in
rounding noise.
"""

from __future__ import annotations

import numpy as np

from ..errors import DeterminismError
from .params import ParamStore

# Floor of the relative-error denominator, guarding near-zero gradients.
DENOM_FLOOR = 1e-8


def grad_check(f, params: ParamStore, step=1e-4, seed=0, samples_per_entry=200,
               progress=None):
    """Max relative error between analytic and central-difference gradients.

    ``f(params)`` must rebuild its computation from the current parameter
    values and return a scalar Tensor, deterministically (fixed inputs,
    eval-mode normalization). Entries larger than ``samples_per_entry``
    scalars are subsampled with the given seed; smaller entries are checked
    exhaustively. Relative error for one scalar is
    ``|g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|)``.
    """
    base_a = f(params).data
    base_b = f(params).data
    if base_a.tobytes() != base_b.tobytes():
        raise DeterminismError(
            "objective is not deterministic: two evaluations differ "
            f"({base_a!r} vs {base_b!r})"
        )

    params.zero_grads()
    out = f(params)
    out.backward()
    analytic = {
        name: (np.zeros_like(p.data) if p.grad is None else p.grad.copy())
        for name, p in params.named_parameters()
    }

    rng = np.random.default_rng(seed)
    worst = 0.0
    for name, p in params.named_parameters():
        flat = p.data.reshape(-1)
        gflat = analytic[name].reshape(-1)
        n = flat.size
        if n <= samples_per_entry:
            indices = np.arange(n)
        else:
            indices = np.sort(rng.choice(n, size=samples_per_entry, replace=False))
        entry_worst = 0.0
        for i in indices:
            orig = flat[i]
            flat[i] = orig + step
            f_plus = f(params).item()
            flat[i] = orig - step
            f_minus = f(params).item()
            flat[i] = orig
            g_fd = (f_plus - f_minus) / (2.0 * step)
            g_ad = gflat[i]
            rel = abs(g_ad - g_fd) / max(DENOM_FLOOR, abs(g_ad) + abs(g_fd))
            if rel > entry_worst:
                entry_worst = rel
        if progress is not None:
            progress(name, entry_worst)
        if entry_worst > worst:
            worst = entry_worst
    return worst
