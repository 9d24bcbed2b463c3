"""Differentiable channel-distortion simulations and the curriculum scheduler.

Six attack kinds: mp3 (STFT magnitude quantization + high-band cutoff),
aac (MDCT companding + quantization + cutoff), gaussian noise at a target
SNR, time stretching via double resampling, and windowed-sinc low-/band-pass
FIR filters. Every attack maps a (1, H) tensor to a (1, H) tensor, clamps
to [-1, 1] at the end, and back-propagates to its input (quantizers via the
straight-through estimator, noise treated as a constant).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import diffgraph as dg
from .diffgraph.spectral import MAG_FLOOR
from .rng import SplitMix64

MP3_LEVELS = {64: 32, 128: 64, 256: 128}
MP3_CUTOFF_HZ = {64: 5000.0, 128: 6500.0, 256: 7500.0}
AAC_LEVELS = dict(MP3_LEVELS)
AAC_CUTOFF_HZ = {64: 5000.0, 128: 6500.0, 256: 7000.0}
AAC_POWER = 0.75
FIR_TAPS = 127
STFT_FRAME, STFT_HOP = 1024, 256
MDCT_FRAME = 2048

KINDS = ("none", "gaussian_noise", "mp3", "aac", "lowpass", "bandpass", "time_stretch")


class AttackSpecError(ValueError):
    pass


@dataclass(frozen=True)
class AttackSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise AttackSpecError(f"unknown attack kind {self.kind!r}")
        p = dict(self.params)
        if self.kind == "gaussian_noise":
            snr = float(p.get("snr_db", 30.0))
            if not 0.0 <= snr <= 100.0:
                raise AttackSpecError(f"snr_db must be in [0, 100], got {snr}")
            p["snr_db"] = snr
        elif self.kind in ("mp3", "aac"):
            br = int(p.get("bitrate_kbps", 128))
            if br not in MP3_LEVELS:
                raise AttackSpecError(f"bitrate_kbps must be one of {sorted(MP3_LEVELS)}, got {br}")
            p["bitrate_kbps"] = br
        elif self.kind == "time_stretch":
            k = float(p.get("factor", 0.9))
            if not 0.5 <= k <= 2.0:
                raise AttackSpecError(f"stretch factor must be in [0.5, 2], got {k}")
            p["factor"] = k
        elif self.kind == "lowpass":
            p["cutoff_hz"] = float(p.get("cutoff_hz", 4000.0))
        elif self.kind == "bandpass":
            lo = float(p.get("lo_hz", 300.0))
            hi = float(p.get("hi_hz", 8000.0))
            if lo >= hi:
                raise AttackSpecError(f"bandpass needs lo < hi, got {lo} >= {hi}")
            p["lo_hz"], p["hi_hz"] = lo, hi
        object.__setattr__(self, "params", p)

    def label(self) -> str:
        if self.kind == "none":
            return "none"
        items = "_".join(f"{v}" for _, v in sorted(self.params.items()))
        return f"{self.kind}_{items}"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> "AttackSpec":
        return cls(kind=d["kind"], params=dict(d.get("params", {})))


# ---------------------------------------------------------------------------
# individual attacks
# ---------------------------------------------------------------------------


def add_noise(signal: dg.Tensor, snr_db: float, rng: SplitMix64, ref_power: float | None = None) -> dg.Tensor:
    """Additive white Gaussian noise at the requested SNR.

    sigma = sqrt(P * 10**(-SNR/10)) where P is the mean per-sample power of
    the reference (the cover signal; falls back to the input itself).
    """
    if ref_power is None:
        ref_power = float(np.mean(signal.data.astype(np.float64) ** 2))
    sigma = float(np.sqrt(ref_power * 10.0 ** (-snr_db / 10.0)))
    noise = rng.normals(signal.data.size, signal.data.dtype).reshape(signal.data.shape) * signal.data.dtype.type(sigma)
    return dg.add(signal, noise)


def _band_mask(n_bins: int, bin_hz: float, cutoff_hz: float, dtype) -> np.ndarray:
    freqs = np.arange(n_bins) * bin_hz
    return (freqs <= cutoff_hz).astype(dtype)


def mp3_sim(signal: dg.Tensor, bitrate_kbps: int, sample_rate: int) -> dg.Tensor:
    """STFT-domain codec sketch: per-frame magnitude quantization plus a
    bitrate-dependent high-frequency cutoff; phase untouched."""
    if bitrate_kbps not in MP3_LEVELS:
        raise AttackSpecError(f"unsupported mp3 bitrate {bitrate_kbps}")
    levels = MP3_LEVELS[bitrate_kbps]
    h = signal.data.shape[1]
    re, im = dg.stft(signal, STFT_FRAME, STFT_HOP)
    mag = dg.sqrt(dg.add(dg.mul(re, re), dg.mul(im, im)))
    mag = dg.clamp(mag, lo=MAG_FLOOR)
    step = np.maximum(mag.data.max(axis=1, keepdims=True), 1e-9) / levels  # constant per frame
    qmag = dg.quantize_ste(mag, step)
    mask = _band_mask(mag.data.shape[1], sample_rate / STFT_FRAME, MP3_CUTOFF_HZ[bitrate_kbps], mag.data.dtype)
    scale = dg.mul(dg.div(qmag, mag), dg.Tensor(np.broadcast_to(mask, mag.data.shape).copy()))
    out = dg.istft(dg.mul(re, scale), dg.mul(im, scale), STFT_FRAME, STFT_HOP, h)
    return dg.clamp(out, -1.0, 1.0)


def aac_sim(signal: dg.Tensor, bitrate_kbps: int, sample_rate: int) -> dg.Tensor:
    """MDCT-domain codec sketch: power-law companding, uniform quantization
    of companded coefficients, high-band cutoff, inverse with overlap-add."""
    if bitrate_kbps not in AAC_LEVELS:
        raise AttackSpecError(f"unsupported aac bitrate {bitrate_kbps}")
    levels = AAC_LEVELS[bitrate_kbps]
    h = signal.data.shape[1]
    coeffs = dg.mdct(signal, MDCT_FRAME)
    comp = dg.pow_const(coeffs, AAC_POWER)
    step = np.maximum(np.abs(comp.data).max(axis=0, keepdims=True), 1e-9) / levels
    qcomp = dg.quantize_ste(comp, step)
    half = MDCT_FRAME // 2
    bin_hz = sample_rate / MDCT_FRAME
    freqs = (np.arange(half) + 0.5) * bin_hz
    mask = (freqs <= AAC_CUTOFF_HZ[bitrate_kbps]).astype(coeffs.data.dtype)[:, None]
    masked = dg.mul(qcomp, dg.Tensor(np.broadcast_to(mask, coeffs.data.shape).copy()))
    out = dg.imdct(dg.pow_const(masked, 1.0 / AAC_POWER), MDCT_FRAME, h)
    return dg.clamp(out, -1.0, 1.0)


def time_stretch(signal: dg.Tensor, factor: float) -> dg.Tensor:
    """Resample to round(k*H), then linearly interpolate back to H."""
    if not 0.5 <= factor <= 2.0:
        raise AttackSpecError(f"stretch factor must be in [0.5, 2], got {factor}")
    h = signal.data.shape[1]
    mid = int(round(factor * h))
    if mid < 2:
        raise AttackSpecError(f"stretched length {mid} too short")
    if mid == h:
        return dg.clamp(signal, -1.0, 1.0)
    stretched = dg.linear_resample(signal, mid)
    return dg.clamp(dg.linear_resample(stretched, h), -1.0, 1.0)


def design_lowpass(cutoff_hz: float, sample_rate: int, taps: int = FIR_TAPS) -> np.ndarray:
    """Hamming-windowed sinc, DC gain normalized to exactly 1."""
    if not 0.0 < cutoff_hz < sample_rate / 2.0:
        raise AttackSpecError(f"lowpass cutoff {cutoff_hz} outside (0, Nyquist)")
    m = taps - 1
    n = np.arange(taps) - m / 2.0
    fc = cutoff_hz / sample_rate
    kern = 2.0 * fc * np.sinc(2.0 * fc * n)
    kern *= np.hamming(taps)
    return (kern / kern.sum()).astype(np.float64)


def design_bandpass(lo_hz: float, hi_hz: float, sample_rate: int, taps: int = FIR_TAPS) -> np.ndarray:
    """Difference of two unity-DC lowpasses; hi is capped just below Nyquist."""
    nyq = sample_rate / 2.0
    hi_hz = min(hi_hz, nyq * 0.9999)
    if not 0.0 < lo_hz < hi_hz:
        raise AttackSpecError(f"bandpass needs 0 < lo < hi, got {lo_hz}, {hi_hz}")
    return design_lowpass(hi_hz, sample_rate, taps) - design_lowpass(lo_hz, sample_rate, taps)


def fir_filter(signal: dg.Tensor, taps: np.ndarray) -> dg.Tensor:
    """Zero-phase FIR: symmetric padding, stride-1 conv, group-delay crop."""
    taps = np.asarray(taps, dtype=signal.data.dtype)
    half = (taps.size - 1) // 2
    h = signal.data.shape[1]
    w = dg.Tensor(taps.reshape(1, 1, -1))
    b = dg.Tensor(np.zeros(1, dtype=signal.data.dtype))
    padded = dg.pad_symmetric(signal, half)
    out = dg.slice_time(dg.conv1d(padded, w, b, padding=half), half, h)
    return dg.clamp(out, -1.0, 1.0)


def apply_attack(
    signal: dg.Tensor,
    spec: AttackSpec,
    sample_rate: int,
    rng: SplitMix64 | None = None,
    ref_power: float | None = None,
) -> dg.Tensor:
    """Dispatch a single AttackSpec; 'none' is the identity."""
    if spec.kind == "none":
        return signal
    if spec.kind == "gaussian_noise":
        if rng is None:
            raise AttackSpecError("gaussian_noise needs an explicit PRNG stream")
        return dg.clamp(add_noise(signal, spec.params["snr_db"], rng, ref_power), -1.0, 1.0)
    if spec.kind == "mp3":
        return mp3_sim(signal, spec.params["bitrate_kbps"], sample_rate)
    if spec.kind == "aac":
        return aac_sim(signal, spec.params["bitrate_kbps"], sample_rate)
    if spec.kind == "time_stretch":
        return time_stretch(signal, spec.params["factor"])
    if spec.kind == "lowpass":
        return fir_filter(signal, design_lowpass(spec.params["cutoff_hz"], sample_rate))
    if spec.kind == "bandpass":
        return fir_filter(signal, design_bandpass(spec.params["lo_hz"], spec.params["hi_hz"], sample_rate))
    raise AttackSpecError(f"unhandled attack kind {spec.kind}")


# ---------------------------------------------------------------------------
# curriculum
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Curriculum:
    """Attack stages activated by iteration index, round-robin once active."""

    stages: tuple = ()
    warmup: int = 500

    def __post_init__(self):
        stages = tuple((AttackSpec.from_dict(s[0]) if isinstance(s[0], dict) else s[0], int(s[1])) for s in self.stages)
        starts = [s[1] for s in stages]
        if any(a >= b for a, b in zip(starts, starts[1:])):
            raise AttackSpecError(f"stage start iterations must be strictly increasing, got {starts}")
        if self.warmup < 0:
            raise AttackSpecError("warmup must be >= 0")
        object.__setattr__(self, "stages", stages)

    def to_dict(self) -> dict:
        return {
            "warmup": self.warmup,
            "stages": [{"attack": s.to_dict(), "start_iteration": i} for s, i in self.stages],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Curriculum":
        return cls(
            stages=tuple((AttackSpec.from_dict(s["attack"]), s["start_iteration"]) for s in d.get("stages", [])),
            warmup=int(d.get("warmup", 500)),
        )


def default_curriculum(warmup: int = 500, ramp_end: int = 1500) -> Curriculum:
    """Noise -> mp3 -> aac -> lowpass -> bandpass -> stretch, staged evenly
    over (warmup, ramp_end]."""
    kinds = [
        AttackSpec("gaussian_noise", {"snr_db": 30.0}),
        AttackSpec("mp3", {"bitrate_kbps": 128}),
        AttackSpec("aac", {"bitrate_kbps": 128}),
        AttackSpec("lowpass", {"cutoff_hz": 4000.0}),
        AttackSpec("bandpass", {"lo_hz": 300.0, "hi_hz": 8000.0}),
        AttackSpec("time_stretch", {"factor": 0.9}),
    ]
    span = max(ramp_end - warmup, len(kinds))
    stages = tuple((spec, warmup + 1 + (j * span) // len(kinds)) for j, spec in enumerate(kinds))
    return Curriculum(stages=stages, warmup=warmup)


def schedule(curriculum: Curriculum, iteration: int) -> AttackSpec | None:
    """Attack for this iteration: none during warmup, then round-robin over
    the stages whose start_iteration has been reached, in stage order."""
    if iteration < 1:
        raise AttackSpecError(f"iteration index must be >= 1, got {iteration}")
    if iteration <= curriculum.warmup:
        return None
    active = [spec for spec, start in curriculum.stages if start <= iteration]
    if not active:
        if not curriculum.stages:
            raise AttackSpecError("curriculum has no stages after warmup")
        return None
    return active[(iteration - curriculum.warmup - 1) % len(active)]
