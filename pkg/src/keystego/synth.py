"""Deterministic synthetic cover clips (tone + noise mixtures) for demos
and the desk-scale test corpus. Real speech can substitute anywhere a
directory of PCM16 mono WAVs is accepted."""

from __future__ import annotations

import numpy as np

from .rng import SplitMix64
from .wavio import AudioClip, quantize_samples


def make_cover(seed: int, length: int = 16000, sample_rate: int = 16000) -> AudioClip:
    """One clip: a few low/mid tones over band-limited noise, peak ~0.7,
    snapped to the PCM16 grid so it behaves like a file that was read back."""
    rng = SplitMix64(seed)
    t = np.arange(length, dtype=np.float64) / sample_rate
    n_tones = 2 + int(rng.next_float() * 3)  # 2..4
    x = np.zeros(length, dtype=np.float64)
    for _ in range(n_tones):
        freq = 150.0 + rng.next_float() * 1650.0
        amp = 0.2 + rng.next_float() * 0.5
        phase = rng.next_float() * 2.0 * np.pi
        x += amp * np.sin(2.0 * np.pi * freq * t + phase)
        # slow amplitude wobble so clips are not strictly stationary
        x *= 1.0 + 0.1 * np.sin(2.0 * np.pi * (0.5 + rng.next_float()) * t)

    noise = rng.normals(length, np.float64).astype(np.float64)
    spec = np.fft.rfft(noise)
    freqs = np.fft.rfftfreq(length, 1.0 / sample_rate)
    rolloff = 1.0 / (1.0 + (freqs / 1500.0) ** 2)  # pink-ish, fades by ~3 kHz
    noise = np.fft.irfft(spec * rolloff, length)
    noise *= 0.05 / max(np.abs(noise).max(), 1e-12)
    x += noise

    x *= 0.7 / max(np.abs(x).max(), 1e-12)
    return AudioClip(samples=quantize_samples(x.astype(np.float32)), sample_rate=sample_rate)


def make_corpus(n_clips: int, base_seed: int = 2024, length: int = 16000, sample_rate: int = 16000):
    return [make_cover(base_seed + 17 * i, length, sample_rate) for i in range(n_clips)]
