"""Differentiable primitives: elementwise math, the conv/norm/pool stack,
straight-through quantization, resampling and framed spectral transforms.

Signals are (channels, length) arrays; weights follow (cout, cin, kw).
Forward/backward run in whatever dtype the inputs carry (float32 in the
pipeline, float64 under grad_check).
"""

from __future__ import annotations

import numpy as np

from .. import kernels
from .core import GraphError, Tensor


def _t(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float32))


# ---------------------------------------------------------------------------
# elementwise / reductions
# ---------------------------------------------------------------------------


def add(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        c = np.asarray(b, dtype=a.data.dtype) if isinstance(b, np.ndarray) else a.data.dtype.type(b)
        out = Tensor(a.data + c, parents=(a,), op="add_c")
        out._backward = lambda g: a.requires_grad and a.accumulate(g)
        return out
    if a.data.shape != b.data.shape:
        raise GraphError(f"add shape mismatch {a.shape} vs {b.shape}")
    out = Tensor(a.data + b.data, parents=(a, b), op="add")

    def bwd(g):
        if a.requires_grad:
            a.accumulate(g)
        if b.requires_grad:
            b.accumulate(g)

    out._backward = bwd
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise GraphError(f"sub shape mismatch {a.shape} vs {b.shape}")
    out = Tensor(a.data - b.data, parents=(a, b), op="sub")

    def bwd(g):
        if a.requires_grad:
            a.accumulate(g)
        if b.requires_grad:
            b.accumulate(-g)

    out._backward = bwd
    return out


def mul(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        c = a.data.dtype.type(b)
        out = Tensor(a.data * c, parents=(a,), op="mul_c")
        out._backward = lambda g: a.requires_grad and a.accumulate(g * c)
        return out
    if a.data.shape != b.data.shape:
        raise GraphError(f"mul shape mismatch {a.shape} vs {b.shape}")
    out = Tensor(a.data * b.data, parents=(a, b), op="mul")

    def bwd(g):
        if a.requires_grad:
            a.accumulate(g * b.data)
        if b.requires_grad:
            b.accumulate(g * a.data)

    out._backward = bwd
    return out


def div(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise GraphError(f"div shape mismatch {a.shape} vs {b.shape}")
    out = Tensor(a.data / b.data, parents=(a, b), op="div")

    def bwd(g):
        if a.requires_grad:
            a.accumulate(g / b.data)
        if b.requires_grad:
            b.accumulate(-g * out.data / b.data)

    out._backward = bwd
    return out


def neg(a: Tensor) -> Tensor:
    out = Tensor(-a.data, parents=(a,), op="neg")
    out._backward = lambda g: a.requires_grad and a.accumulate(-g)
    return out


def log(a: Tensor) -> Tensor:
    out = Tensor(np.log(a.data), parents=(a,), op="log")
    out._backward = lambda g: a.requires_grad and a.accumulate(g / a.data)
    return out


def sqrt(a: Tensor) -> Tensor:
    out = Tensor(np.sqrt(a.data), parents=(a,), op="sqrt")
    out._backward = lambda g: a.requires_grad and a.accumulate(g * (0.5 / out.data))
    return out


def tanh(a: Tensor) -> Tensor:
    out = Tensor(np.tanh(a.data), parents=(a,), op="tanh")
    out._backward = lambda g: a.requires_grad and a.accumulate(g * (1.0 - out.data * out.data))
    return out


def pow_const(a: Tensor, p: float, grad_floor: float = 1e-9) -> Tensor:
    """sign(a)*|a|**p with the backward base floored away from zero."""
    mag = np.abs(a.data)
    out = Tensor(np.sign(a.data) * mag**p, parents=(a,), op="pow_c")
    out._backward = lambda g: a.requires_grad and a.accumulate(
        g * (p * np.maximum(mag, grad_floor) ** (p - 1.0))
    )
    return out


def clamp(a: Tensor, lo=None, hi=None) -> Tensor:
    """Elementwise clip; gradient passes through the un-clipped region."""
    out_data = np.clip(a.data, lo, hi)
    out = Tensor(out_data, parents=(a,), op="clamp")
    inside = np.ones(a.data.shape, dtype=bool)
    if lo is not None:
        inside &= a.data >= lo
    if hi is not None:
        inside &= a.data <= hi
    out._backward = lambda g: a.requires_grad and a.accumulate(g * inside)
    return out


def sum_all(a: Tensor) -> Tensor:
    out = Tensor(a.data.sum(dtype=a.data.dtype), parents=(a,), op="sum")
    out._backward = lambda g: a.requires_grad and a.accumulate(np.broadcast_to(g, a.data.shape))
    return out


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size
    out = Tensor(a.data.mean(dtype=a.data.dtype), parents=(a,), op="mean")
    out._backward = lambda g: a.requires_grad and a.accumulate(np.broadcast_to(g / n, a.data.shape))
    return out


# ---------------------------------------------------------------------------
# network primitives
# ---------------------------------------------------------------------------


def conv1d(x: Tensor, w: Tensor, b: Tensor, padding: int, stride: int = 1) -> Tensor:
    """Cross-correlation over (cin, L) with (cout, cin, kw) weights.

    stride 1 is the length-preserving path (padding must be (kw-1)/2, kw
    odd); stride >= 2 is used by the detectors and shrinks the length.
    """
    if x.data.ndim != 2 or w.data.ndim != 3:
        raise GraphError(f"conv1d rank mismatch: x{x.shape} w{w.shape}")
    cout, cin, kw = w.data.shape
    if kw % 2 == 0:
        raise GraphError(f"conv1d kernel width must be odd, got {kw}")
    if x.data.shape[0] != cin:
        raise GraphError(f"conv1d channel mismatch: input {x.data.shape[0]}, weights {cin}")
    if b.data.shape != (cout,):
        raise GraphError(f"conv1d bias shape {b.data.shape} != ({cout},)")
    if stride == 1 and padding != (kw - 1) // 2:
        raise GraphError(f"conv1d stride-1 padding must be {(kw - 1) // 2}, got {padding}")
    l = x.data.shape[1]
    lout = kernels.out_length(l, kw, padding, stride)
    w2 = np.ascontiguousarray(w.data.reshape(cout, cin * kw))
    xd = np.ascontiguousarray(x.data)
    out = Tensor(
        kernels.conv1d_forward(xd, w2, b.data, kw, padding, stride, lout),
        parents=(x, w, b),
        op="conv1d",
    )

    def bwd(g):
        g = np.ascontiguousarray(g)
        if x.requires_grad:
            x.accumulate(kernels.conv1d_backward_input(g, w2, cin, kw, padding, stride, l))
        if w.requires_grad or b.requires_grad:
            gw2, gb = kernels.conv1d_backward_weights(g, xd, kw, padding, stride)
            if w.requires_grad:
                w.accumulate(gw2.reshape(cout, cin, kw))
            if b.requires_grad:
                b.accumulate(gb)

    out._backward = bwd
    return out


def instance_norm1d(x: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-channel standardization over time, biased variance, no affine."""
    if x.data.ndim != 2 or x.data.shape[1] < 2:
        raise GraphError(f"instance_norm1d needs (C, L>=2), got {x.shape}")
    mu = x.data.mean(axis=1, keepdims=True, dtype=x.data.dtype)
    var = x.data.var(axis=1, keepdims=True, dtype=x.data.dtype)
    inv = 1.0 / np.sqrt(var + np.asarray(eps, dtype=x.data.dtype))
    y = (x.data - mu) * inv
    out = Tensor(y, parents=(x,), op="inorm")

    def bwd(g):
        if not x.requires_grad:
            return
        gm = g.mean(axis=1, keepdims=True, dtype=g.dtype)
        gym = (g * y).mean(axis=1, keepdims=True, dtype=g.dtype)
        x.accumulate(inv * (g - gm - y * gym))

    out._backward = bwd
    return out


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    if not 0.0 < slope < 1.0:
        raise GraphError(f"leaky_relu slope must be in (0,1), got {slope}")
    pos = x.data >= 0  # derivative at exactly 0 is 1
    out = Tensor(np.where(pos, x.data, x.data * np.asarray(slope, x.data.dtype)), parents=(x,), op="lrelu")
    out._backward = lambda g: x.requires_grad and x.accumulate(
        np.where(pos, g, g * np.asarray(slope, g.dtype))
    )
    return out


def sigmoid(x: Tensor) -> Tensor:
    """Numerically stable logistic; output pinned strictly inside (0, 1)."""
    d = x.data
    y = np.empty_like(d)
    pos = d >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    e = np.exp(d[~pos])
    y[~pos] = e / (1.0 + e)
    tiny = np.nextafter(d.dtype.type(0), d.dtype.type(1))
    top = np.nextafter(d.dtype.type(1), d.dtype.type(0))
    np.clip(y, tiny, top, out=y)
    out = Tensor(y, parents=(x,), op="sigmoid")
    out._backward = lambda g: x.requires_grad and x.accumulate(g * y * (1.0 - y))
    return out


def adaptive_avg_pool1d(x: Tensor, out_len: int) -> Tensor:
    """Average over index-computed bins: bin j spans [j*L//K, (j+1)*L//K)."""
    c, l = x.data.shape
    k = int(out_len)
    if not 1 <= k <= l:
        raise GraphError(f"adaptive_avg_pool1d needs 1 <= K <= L, got K={k}, L={l}")
    starts = (np.arange(k) * l) // k
    sizes = ((np.arange(1, k + 1) * l) // k - starts).astype(x.data.dtype)
    y = np.add.reduceat(x.data, starts, axis=1) / sizes
    out = Tensor(y.astype(x.data.dtype), parents=(x,), op="pool")

    def bwd(g):
        if x.requires_grad:
            x.accumulate(np.repeat(g / sizes, sizes.astype(np.int64), axis=1))

    out._backward = bwd
    return out


def quantize_ste(x: Tensor, step) -> Tensor:
    """Round to multiples of step (half away from zero); identity backward.

    step may be a positive scalar or an array broadcastable to x (per-frame
    steps); it is treated as a constant.
    """
    step = np.asarray(step, dtype=x.data.dtype)
    if np.any(step <= 0):
        raise GraphError("quantize_ste needs step > 0")
    q = np.sign(x.data) * np.floor(np.abs(x.data) / step + 0.5) * step
    out = Tensor(q.astype(x.data.dtype), parents=(x,), op="quantize_ste")
    out._backward = lambda g: x.requires_grad and x.accumulate(g)
    return out


def linear_resample(x: Tensor, out_len: int) -> Tensor:
    """Endpoint-preserving linear interpolation from (1, L) to (1, out_len)."""
    c, l = x.data.shape
    if out_len < 2 or l < 2:
        raise GraphError(f"linear_resample needs lengths >= 2 (L={l}, out={out_len})")
    pos = np.arange(out_len, dtype=np.float64) * ((l - 1) / (out_len - 1))
    i0 = np.minimum(pos.astype(np.int64), l - 2)
    frac = (pos - i0).astype(x.data.dtype)
    y = x.data[:, i0] * (1.0 - frac) + x.data[:, i0 + 1] * frac
    out = Tensor(y.astype(x.data.dtype), parents=(x,), op="resample")

    def bwd(g):
        if not x.requires_grad:
            return
        gx = np.zeros_like(x.data)
        for ch in range(c):
            np.add.at(gx[ch], i0, g[ch] * (1.0 - frac))
            np.add.at(gx[ch], i0 + 1, g[ch] * frac)
        x.accumulate(gx)

    out._backward = bwd
    return out


def pad_symmetric(x: Tensor, n: int) -> Tensor:
    """Mirror-pad (1, L) by n on both ends (numpy 'symmetric' convention)."""
    c, l = x.data.shape
    if n >= l:
        raise GraphError(f"pad_symmetric needs n < L ({n} >= {l})")
    out = Tensor(np.pad(x.data, ((0, 0), (n, n)), mode="symmetric"), parents=(x,), op="pad_sym")

    def bwd(g):
        if not x.requires_grad:
            return
        gx = g[:, n:n + l].copy()
        gx[:, :n] += g[:, n - 1::-1]
        gx[:, l - n:] += g[:, :l + 2 * n - n - 1:-1]
        x.accumulate(gx)

    out._backward = bwd
    return out


def slice_time(x: Tensor, start: int, length: int) -> Tensor:
    out = Tensor(x.data[:, start:start + length].copy(), parents=(x,), op="slice")

    def bwd(g):
        if not x.requires_grad:
            return
        gx = np.zeros_like(x.data)
        gx[:, start:start + length] = g
        x.accumulate(gx)

    out._backward = bwd
    return out


def slice_channels(x: Tensor, start: int, length: int) -> Tensor:
    out = Tensor(x.data[start:start + length].copy(), parents=(x,), op="slice_ch")

    def bwd(g):
        if not x.requires_grad:
            return
        gx = np.zeros_like(x.data)
        gx[start:start + length] = g
        x.accumulate(gx)

    out._backward = bwd
    return out
