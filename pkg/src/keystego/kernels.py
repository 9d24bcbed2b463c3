"""Hot numeric kernels for 1-D convolution, with two interchangeable backends.

The optimizer spends nearly all of its time in these three routines, so they
get special treatment:

* ``numba`` backend — @njit im2col/col2im around a BLAS GEMM (numba's
  ``np.dot``). Default when numba imports.
* ``numpy`` backend — pure numpy: stride-tricks im2col + ``@``.

Select with the environment variable ``KEYSTEGO_BACKEND`` set to ``numba``
or ``numpy`` (anything else / unset means auto). Both backends compute the
same quantities; summation order differs, so results may differ in the last
float bit between backends (they are bit-stable within one backend).
``scripts/bench_kernels.py`` times one against the other.

Weight layout is pre-flattened: w2[cout, cin*kw], row-major over (cin, kw).
"""

from __future__ import annotations

import os

import numpy as np
from numpy.lib.stride_tricks import as_strided

try:
    from numba import njit

    _HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAS_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap


def out_length(l: int, kw: int, pad: int, stride: int) -> int:
    return (l + 2 * pad - kw) // stride + 1


# ---------------------------------------------------------------------------
# numba backend
# ---------------------------------------------------------------------------


@njit(cache=True)
def _im2col_nb(x, kw, pad, stride, lout):
    cin, l = x.shape
    cols = np.empty((cin * kw, lout), dtype=x.dtype)
    for ci in range(cin):
        for k in range(kw):
            r = ci * kw + k
            off = k - pad
            for t in range(lout):
                src = t * stride + off
                if 0 <= src < l:
                    cols[r, t] = x[ci, src]
                else:
                    cols[r, t] = 0.0
    return cols


@njit(cache=True)
def _conv_fwd_nb(x, w2, bias, kw, pad, stride, lout):
    cols = _im2col_nb(x, kw, pad, stride, lout)
    out = np.dot(w2, cols)
    cout = out.shape[0]
    for co in range(cout):
        bv = bias[co]
        for t in range(lout):
            out[co, t] += bv
    return out


@njit(cache=True)
def _conv_bwd_input_nb(gout, w2, cin, kw, pad, stride, l):
    gcols = np.dot(w2.T.copy(), gout)
    gx = np.zeros((cin, l), dtype=gout.dtype)
    lout = gout.shape[1]
    for ci in range(cin):
        for k in range(kw):
            r = ci * kw + k
            off = k - pad
            for t in range(lout):
                src = t * stride + off
                if 0 <= src < l:
                    gx[ci, src] += gcols[r, t]
    return gx


@njit(cache=True)
def _conv_bwd_weights_nb(gout, x, kw, pad, stride):
    lout = gout.shape[1]
    cols = _im2col_nb(x, kw, pad, stride, lout)
    gw2 = np.dot(gout, cols.T.copy())
    gbias = np.empty(gout.shape[0], dtype=gout.dtype)
    for co in range(gout.shape[0]):
        s = 0.0
        for t in range(lout):
            s += gout[co, t]
        gbias[co] = s
    return gw2, gbias


# ---------------------------------------------------------------------------
# numpy backend
# ---------------------------------------------------------------------------


def _im2col_np(x, kw, pad, stride, lout):
    cin, l = x.shape
    xp = np.zeros((cin, l + 2 * pad), dtype=x.dtype)
    xp[:, pad:pad + l] = x
    s0, s1 = xp.strides
    cols = as_strided(xp, shape=(cin, kw, lout), strides=(s0, s1, s1 * stride))
    return np.ascontiguousarray(cols).reshape(cin * kw, lout)


def _conv_fwd_np(x, w2, bias, kw, pad, stride, lout):
    out = w2 @ _im2col_np(x, kw, pad, stride, lout)
    out += bias[:, None]
    return out


def _conv_bwd_input_np(gout, w2, cin, kw, pad, stride, l):
    gcols = (w2.T @ gout).reshape(cin, kw, -1)
    lout = gout.shape[1]
    gxp = np.zeros((cin, l + 2 * pad), dtype=gout.dtype)
    for k in range(kw):
        gxp[:, k:k + lout * stride:stride] += gcols[:, k, :]
    return gxp[:, pad:pad + l] if pad else gxp


def _conv_bwd_weights_np(gout, x, kw, pad, stride):
    lout = gout.shape[1]
    cols = _im2col_np(x, kw, pad, stride, lout)
    return gout @ cols.T, gout.sum(axis=1)


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

_env = os.environ.get("KEYSTEGO_BACKEND", "auto").lower()
if _env == "numpy":
    BACKEND = "numpy"
elif _env == "numba":
    if not _HAS_NUMBA:
        raise ImportError("KEYSTEGO_BACKEND=numba but numba is not importable")
    BACKEND = "numba"
else:
    BACKEND = "numba" if _HAS_NUMBA else "numpy"


def conv1d_forward(x, w2, bias, kw, pad, stride, lout):
    if BACKEND == "numba":
        return _conv_fwd_nb(x, w2, bias, kw, pad, stride, lout)
    return _conv_fwd_np(x, w2, bias, kw, pad, stride, lout)


def conv1d_backward_input(gout, w2, cin, kw, pad, stride, l):
    if BACKEND == "numba":
        return _conv_bwd_input_nb(gout, w2, cin, kw, pad, stride, l)
    return _conv_bwd_input_np(gout, w2, cin, kw, pad, stride, l)


def conv1d_backward_weights(gout, x, kw, pad, stride):
    if BACKEND == "numba":
        return _conv_bwd_weights_nb(gout, x, kw, pad, stride)
    return _conv_bwd_weights_np(gout, x, kw, pad, stride)


IMPLS = {
    "numba": (_conv_fwd_nb, _conv_bwd_input_nb, _conv_bwd_weights_nb),
    "numpy": (_conv_fwd_np, _conv_bwd_input_np, _conv_bwd_weights_np),
}
