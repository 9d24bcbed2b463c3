"""Finite-difference validation harness for the reverse-mode primitives.

Runs in float64: a random scalar projection of the op output is
back-propagated and compared against central differences. quantize_ste is
exempt by construction (straight-through estimator), and callers should keep
inputs away from kinks (|x| near 0 for leaky_relu, clamp edges).
"""

from __future__ import annotations

import numpy as np

from ..rng import SplitMix64
from .core import Tensor, backward
from . import ops


def grad_check(fn, inputs, fd_step: float = 1e-4, seed: int = 0):
    """Max relative error between reverse-mode and central-difference grads.

    fn maps Tensors to a Tensor or a tuple of Tensors; inputs is a list of
    float64 arrays, each treated as a differentiable leaf.
    """
    rng = SplitMix64(seed)
    leaves = [Tensor(np.asarray(a, dtype=np.float64), requires_grad=True) for a in inputs]

    def project(outs):
        if isinstance(outs, Tensor):
            outs = (outs,)
        total = None
        for j, o in enumerate(outs):
            r = (SplitMix64(seed + 101 + j).uniforms(o.data.size, np.float64) - 0.5).reshape(o.data.shape)
            term = ops.sum_all(ops.mul(o, Tensor(r)))
            total = term if total is None else ops.add(total, term)
        return total

    loss = project(fn(*leaves))
    backward(loss)
    analytic = [
        lf.grad if lf.grad is not None else np.zeros_like(lf.data) for lf in leaves
    ]

    def scalar(arrays):
        tensors = [Tensor(a) for a in arrays]
        return float(project(fn(*tensors)).data)

    max_rel = 0.0
    per_input = []
    for i, a in enumerate(inputs):
        a = np.asarray(a, dtype=np.float64)
        fd = np.zeros_like(a)
        flat = a.reshape(-1)
        for j in range(flat.size):
            bump = np.array(a, copy=True).reshape(-1)
            bump[j] = flat[j] + fd_step
            hi = scalar([x if k != i else bump.reshape(a.shape) for k, x in enumerate(inputs)])
            bump[j] = flat[j] - fd_step
            lo = scalar([x if k != i else bump.reshape(a.shape) for k, x in enumerate(inputs)])
            fd.reshape(-1)[j] = (hi - lo) / (2.0 * fd_step)
        diff = np.abs(analytic[i] - fd)
        denom = np.maximum(np.maximum(np.abs(analytic[i]), np.abs(fd)), 1e-6)
        rel = float((diff / denom).max()) if a.size else 0.0
        per_input.append(rel)
        max_rel = max(max_rel, rel)
    return {"max_rel_err": max_rel, "per_input": per_input}
