"""Bit-exact RIFF/WAVE PCM16 mono reading and writing.

Reading maps int16 samples to amplitudes via s/32768; writing snaps
amplitudes to the same grid (round half away from zero, clamped to the
int16 range), so write->read->write is stable and read(write(clip)) is
bit-exact for grid-valued clips. Only the canonical fmt+data layout is
emitted; unknown chunks are skipped on read, never preserved.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

SCALE = 32768.0
DEFAULT_RATE = 16000


class WavFormatError(ValueError):
    pass


@dataclass(frozen=True)
class AudioClip:
    """Mono waveform with amplitudes in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int = DEFAULT_RATE
    channels: int = 1

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float32).reshape(-1)
        if arr.size == 0:
            raise WavFormatError("clip must contain at least one sample")
        if self.channels != 1:
            raise WavFormatError(f"only mono clips supported, got channels={self.channels}")
        if not np.all(np.isfinite(arr)):
            raise WavFormatError("clip contains non-finite samples")
        if np.abs(arr).max() > 1.0:
            raise WavFormatError("clip amplitudes must lie in [-1, 1]")
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return int(self.samples.size)


def quantize_samples(x: np.ndarray) -> np.ndarray:
    """Snap amplitudes to the PCM16 grid (what the channel transmits)."""
    ints = amplitudes_to_int16(x)
    return (ints.astype(np.float32) / np.float32(SCALE)).astype(np.float32)


def amplitudes_to_int16(x: np.ndarray) -> np.ndarray:
    x = np.clip(np.asarray(x, dtype=np.float64), -1.0, 1.0)
    scaled = x * SCALE
    ints = np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)  # half away from zero
    return np.clip(ints, -32768, 32767).astype(np.int16)


def read_wav(data: bytes) -> AudioClip:
    """Parse a RIFF/WAVE container holding PCM16 mono samples."""
    if len(data) < 12 or data[0:4] != b"RIFF":
        raise WavFormatError("malformed header: missing RIFF magic")
    if data[8:12] != b"WAVE":
        raise WavFormatError("malformed header: missing WAVE form type")
    pos = 12
    fmt = None
    payload = None
    while pos + 8 <= len(data):
        cid = data[pos:pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8:pos + 8 + size]
        if cid == b"fmt ":
            if size < 16:
                raise WavFormatError(f"malformed fmt chunk: size {size} < 16")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif cid == b"data":
            payload = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned
    if fmt is None:
        raise WavFormatError("malformed header: no fmt chunk")
    if payload is None:
        raise WavFormatError("malformed header: no data chunk")
    tag, channels, rate, _byte_rate, _align, bits = fmt
    if tag != 1:
        raise WavFormatError(f"unsupported format tag {tag} (PCM=1 required)")
    if bits != 16:
        raise WavFormatError(f"unsupported bit depth {bits} (16 required)")
    if channels != 1:
        raise WavFormatError(f"unsupported channel count {channels} (mono required)")
    ints = np.frombuffer(payload[:len(payload) - (len(payload) % 2)], dtype="<i2")
    if ints.size == 0:
        raise WavFormatError("data chunk holds no samples")
    samples = (ints.astype(np.float32) / np.float32(SCALE)).astype(np.float32)
    return AudioClip(samples=samples, sample_rate=int(rate), channels=1)


def write_wav(clip: AudioClip) -> bytes:
    """Emit the canonical 44-byte header + PCM16 LE payload."""
    ints = amplitudes_to_int16(clip.samples)
    payload = ints.astype("<i2").tobytes()
    rate = int(clip.sample_rate)
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    header += b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, rate, rate * 2, 2, 16)
    header += b"data" + struct.pack("<I", len(payload))
    return header + payload


def fit_length(clip: AudioClip, target_len: int) -> AudioClip:
    """Truncate or zero-pad at the tail to exactly target_len samples."""
    if target_len <= 0:
        raise WavFormatError(f"target_len must be positive, got {target_len}")
    n = len(clip)
    if n == target_len:
        return clip
    if n > target_len:
        out = clip.samples[:target_len].copy()
    else:
        out = np.zeros(target_len, dtype=np.float32)
        out[:n] = clip.samples
    return AudioClip(samples=out, sample_rate=clip.sample_rate, channels=1)
