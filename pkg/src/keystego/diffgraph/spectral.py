"""Framed spectral transforms: STFT/iSTFT (Hann) and MDCT/iMDCT (sine window).

Spectra are carried as separate real/imag tensors shaped (frames, bins),
MDCT coefficients as (bins, frames). All four transforms are linear, so
their backwards are exact adjoints; the FFT adjoints fold the hermitian
bin duplication back in (numpy's irfft ignores the imaginary parts of the
DC and Nyquist bins, and so do the gradients here).
"""

from __future__ import annotations

import numpy as np

from .core import GraphError, Tensor

MAG_FLOOR = 1e-9


def _hann(frame: int, dtype) -> np.ndarray:
    n = np.arange(frame)
    return (0.5 - 0.5 * np.cos(2.0 * np.pi * n / frame)).astype(dtype)


def _frame_count(l: int, frame: int, hop: int) -> int:
    if l <= frame:
        return 1
    return int(np.ceil((l - frame) / hop)) + 1


def stft(x: Tensor, frame: int = 1024, hop: int = 256):
    """(1, L) signal -> (re, im) tensors of shape (n_frames, frame//2+1)."""
    if x.data.ndim != 2 or x.data.shape[0] != 1:
        raise GraphError(f"stft expects a (1, L) signal, got {x.shape}")
    l = x.data.shape[1]
    if hop > frame:
        raise GraphError(f"stft hop {hop} > frame {frame}")
    if frame > l:
        raise GraphError(f"stft frame {frame} > signal length {l}")
    if frame & (frame - 1):
        raise GraphError(f"stft frame must be a power of two, got {frame}")
    dt = x.data.dtype
    win = _hann(frame, dt)
    nf = _frame_count(l, frame, hop)
    padded = (nf - 1) * hop + frame
    xp = np.zeros(padded, dtype=dt)
    xp[:l] = x.data[0]
    idx = np.arange(frame)[None, :] + hop * np.arange(nf)[:, None]
    z = np.fft.rfft(xp[idx] * win, axis=1)
    re = Tensor(np.ascontiguousarray(z.real, dtype=dt), parents=(x,), op="stft_re")
    im = Tensor(np.ascontiguousarray(z.imag, dtype=dt), parents=(x,), op="stft_im")

    def adjoint(g):
        # g complex (frames, bins): fold hermitian duplication, OLA back
        g = g.copy()
        g[:, 1:-1] *= 0.5
        g[:, 0] = g[:, 0].real
        g[:, -1] = g[:, -1].real
        gframes = np.fft.irfft(g, n=frame, axis=1) * frame * win
        gx = np.zeros(padded, dtype=np.float64)
        for f in range(nf):
            gx[f * hop:f * hop + frame] += gframes[f]
        x.accumulate(gx[:l][None, :].astype(dt))

    # re and im back-propagate independently (either may be unused)
    re._backward = lambda g: x.requires_grad and adjoint(g.astype(np.float64) + 0j)
    im._backward = lambda g: x.requires_grad and adjoint(1j * g.astype(np.float64))
    return re, im


def istft(re: Tensor, im: Tensor, frame: int, hop: int, length: int) -> Tensor:
    """Overlap-add inverse with squared-window normalization -> (1, length)."""
    if re.data.shape != im.data.shape:
        raise GraphError("istft re/im shape mismatch")
    dt = re.data.dtype
    nf = re.data.shape[0]
    win = _hann(frame, dt)
    padded = (nf - 1) * hop + frame
    frames = np.fft.irfft(re.data.astype(np.float64) + 1j * im.data.astype(np.float64), n=frame, axis=1)
    num = np.zeros(padded, dtype=np.float64)
    den = np.zeros(padded, dtype=np.float64)
    w64 = win.astype(np.float64)
    for f in range(nf):
        num[f * hop:f * hop + frame] += frames[f] * w64
        den[f * hop:f * hop + frame] += w64 * w64
    den = np.maximum(den, 1e-12)
    y = (num / den)[:length]
    out = Tensor(y[None, :].astype(dt), parents=(re, im), op="istft")

    def bwd(g):
        if not (re.requires_grad or im.requires_grad):
            return
        gp = np.zeros(padded, dtype=np.float64)
        gp[:length] = g[0]
        gp /= den
        idx = np.arange(frame)[None, :] + hop * np.arange(nf)[:, None]
        gframes = gp[idx] * w64
        gz = np.fft.rfft(gframes, axis=1)
        gz *= 2.0 / frame
        gz[:, 0] *= 0.5
        gz[:, -1] *= 0.5
        if re.requires_grad:
            re.accumulate(gz.real.astype(dt))
        if im.requires_grad:
            gim = gz.imag
            gim[:, 0] = 0.0  # irfft ignores imag at DC and Nyquist
            gim[:, -1] = 0.0
            im.accumulate(gim.astype(dt))

    out._backward = bwd
    return out


# ---------------------------------------------------------------------------
# MDCT
# ---------------------------------------------------------------------------

_BASIS_CACHE: dict = {}


def _mdct_parts(frame: int, dtype):
    key = (frame, np.dtype(dtype).str)
    if key not in _BASIS_CACHE:
        n2 = frame
        half = frame // 2
        n = np.arange(n2, dtype=np.float64)
        k = np.arange(half, dtype=np.float64)
        basis = np.cos(np.pi / half * (n[None, :] + 0.5 + half / 2.0) * (k[:, None] + 0.5))
        win = np.sin(np.pi * (n + 0.5) / n2)
        _BASIS_CACHE[key] = (basis.astype(dtype), win.astype(dtype))
    return _BASIS_CACHE[key]


def _mdct_layout(l: int, frame: int):
    half = frame // 2
    body = int(np.ceil(l / half)) * half
    total = half + body + half
    nframes = total // half - 1
    return half, total, nframes


def mdct(x: Tensor, frame: int = 2048):
    """(1, L) -> (frame//2, n_frames) coefficients, sine window, 50% overlap.

    The signal is zero-extended by half a frame on each side so every
    original sample is interior to the TDAC reconstruction.
    """
    if x.data.ndim != 2 or x.data.shape[0] != 1:
        raise GraphError(f"mdct expects a (1, L) signal, got {x.shape}")
    if frame % 4:
        raise GraphError("mdct frame must be a multiple of 4")
    l = x.data.shape[1]
    dt = x.data.dtype
    basis, win = _mdct_parts(frame, dt)
    half, total, nframes = _mdct_layout(l, frame)
    xp = np.zeros(total, dtype=dt)
    xp[half:half + l] = x.data[0]
    idx = np.arange(frame)[None, :] + half * np.arange(nframes)[:, None]
    segs = (xp[idx] * win).T  # (frame, nframes)
    coeffs = basis @ segs
    out = Tensor(np.ascontiguousarray(coeffs), parents=(x,), op="mdct")

    def bwd(g):
        if not x.requires_grad:
            return
        gsegs = (basis.T @ g) * win[:, None]  # (frame, nframes)
        gx = np.zeros(total, dtype=dt)
        for f in range(nframes):
            gx[f * half:f * half + frame] += gsegs[:, f]
        x.accumulate(gx[half:half + l][None, :])

    out._backward = bwd
    return out


def imdct(coeffs: Tensor, frame: int, length: int) -> Tensor:
    """Inverse MDCT with windowed overlap-add, cropped back to (1, length)."""
    dt = coeffs.data.dtype
    basis, win = _mdct_parts(frame, dt)
    half = frame // 2
    nframes = coeffs.data.shape[1]
    total = (nframes + 1) * half
    segs = (basis.T @ coeffs.data) * (2.0 / half)  # (frame, nframes)
    segs *= win[:, None]
    y = np.zeros(total, dtype=dt)
    for f in range(nframes):
        y[f * half:f * half + frame] += segs[:, f]
    out = Tensor(y[half:half + length][None, :].copy(), parents=(coeffs,), op="imdct")

    def bwd(g):
        if not coeffs.requires_grad:
            return
        gy = np.zeros(total, dtype=dt)
        gy[half:half + length] = g[0]
        idx = np.arange(frame)[None, :] + half * np.arange(nframes)[:, None]
        gsegs = gy[idx].T * win[:, None] * (2.0 / half)
        coeffs.accumulate(basis @ gsegs)

    out._backward = bwd
    return out
