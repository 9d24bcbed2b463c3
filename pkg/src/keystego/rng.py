"""Deterministic, cross-platform PRNG used everywhere randomness is needed.

SplitMix64 is the sole generator: the decoder weights, detector weights,
noise draws and message bits all come from it, so a 64-bit seed fully
determines a run. The scalar path is plain Python integers (the reference);
the bulk path does the same arithmetic vectorised on uint64 arrays and is
tested to produce an identical sequence.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# uint64 copies for the vectorised path
_U_GOLDEN = np.uint64(_GOLDEN)
_U_MIX1 = np.uint64(_MIX1)
_U_MIX2 = np.uint64(_MIX2)


def mix64(z: int) -> int:
    """SplitMix64 output function on a plain Python int."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


class SplitMix64:
    """Counter-based SplitMix64 stream.

    Draw k (1-based) is mix64(seed + k * GOLDEN), so bulk draws can be
    vectorised without changing the sequence.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK
        self.counter = 0

    def next_u64(self) -> int:
        self.counter += 1
        return mix64((self.seed + self.counter * _GOLDEN) & _MASK)

    def next_float(self) -> float:
        """Uniform in [0, 1) with 24-bit resolution: (u >> 40) * 2**-24."""
        return (self.next_u64() >> 40) * 2.0**-24

    def _raw_block(self, n: int) -> np.ndarray:
        ks = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            z = np.uint64(self.seed) + ks * _U_GOLDEN
            z = (z ^ (z >> np.uint64(30))) * _U_MIX1
            z = (z ^ (z >> np.uint64(27))) * _U_MIX2
            z = z ^ (z >> np.uint64(31))
        return z

    def uniforms(self, n: int, dtype=np.float32) -> np.ndarray:
        """n uniforms in [0, 1); same sequence as repeated next_float()."""
        raw = self._raw_block(n) >> np.uint64(40)
        # 24-bit integers are exact in float32, so the cast loses nothing
        return (raw.astype(np.float64) * 2.0**-24).astype(dtype)

    def normals(self, n: int, dtype=np.float32) -> np.ndarray:
        """n standard normals via Box-Muller over pairs of uniforms.

        Consumes exactly 2*ceil(n/2) raw draws. The log argument is shifted
        to (0, 1] so it never sees zero.
        """
        m = (n + 1) // 2
        raw = self._raw_block(2 * m) >> np.uint64(40)
        u = raw.astype(np.float64) * 2.0**-24
        u1 = (u[:m] * (1.0 - 2.0**-24)) + 2.0**-24  # (0, 1]
        u2 = u[m:]
        r = np.sqrt(-2.0 * np.log(u1))
        ang = (2.0 * np.pi) * u2
        out = np.empty(2 * m, dtype=np.float64)
        out[0::2] = r * np.cos(ang)
        out[1::2] = r * np.sin(ang)
        return out[:n].astype(dtype)

    def spawn(self, index: int) -> "SplitMix64":
        """Independent child stream; derivation depends only on (seed, index)."""
        return SplitMix64(mix64((self.seed + ((index + 1) & _MASK) * _GOLDEN) & _MASK))


def derive_seed(base_seed: int, index: int) -> int:
    """Stable per-item seed for parallel work (one stream per clip)."""
    return SplitMix64(base_seed).spawn(index).seed


def random_bits(seed: int, k: int) -> np.ndarray:
    """k message bits (0/1, uint8) drawn from a SplitMix64 stream."""
    return (SplitMix64(seed)._raw_block(k) >> np.uint64(63)).astype(np.uint8)
