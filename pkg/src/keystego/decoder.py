"""The fixed decoder network: never trained, fully determined by a 64-bit key.

Both parties rebuild the same weights from (key, config): a SplitMix64
stream seeded with the key emits uniforms (u >> 40) * 2**-24, consumed
block by block (all weights row-major, then biases). Weights are
Kaiming-uniform for the leaky slope, computed in float32 so digests match
across platforms.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from . import diffgraph as dg
from .rng import SplitMix64

DEFAULT_BLOCKS = ((1, 16, 41), (16, 32, 21), (32, 32, 11), (32, 16, 5), (16, 1, 3))


class DecoderConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DecoderConfig:
    """Architecture half of the shared secret."""

    blocks: tuple = DEFAULT_BLOCKS
    leaky_slope: float = 0.2
    norm_eps: float = 1e-5
    # pooled features are variance-capped by the block norms; this fixed
    # pre-sigmoid gain gives the bit logits enough range to saturate
    logit_gain: float = 16.0

    def __post_init__(self):
        blocks = tuple(tuple(int(v) for v in b) for b in self.blocks)
        object.__setattr__(self, "blocks", blocks)
        if len(blocks) != 5:
            raise DecoderConfigError(f"decoder must have exactly 5 blocks, got {len(blocks)}")
        if blocks[0][0] != 1 or blocks[-1][1] != 1:
            raise DecoderConfigError("decoder must map 1 channel in to 1 channel out")
        widths = [b[2] for b in blocks]
        if any(w % 2 == 0 for w in widths):
            raise DecoderConfigError(f"kernel widths must be odd, got {widths}")
        if any(a < b for a, b in zip(widths, widths[1:])):
            raise DecoderConfigError(f"kernel widths must be non-increasing, got {widths}")
        for prev, nxt in zip(blocks, blocks[1:]):
            if prev[1] != nxt[0]:
                raise DecoderConfigError(f"channel chain broken: {prev} -> {nxt}")

    def to_dict(self) -> dict:
        return {
            "blocks": [list(b) for b in self.blocks],
            "leaky_slope": self.leaky_slope,
            "norm_eps": self.norm_eps,
            "logit_gain": self.logit_gain,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecoderConfig":
        return cls(
            blocks=tuple(tuple(b) for b in d["blocks"]),
            leaky_slope=float(d["leaky_slope"]),
            norm_eps=float(d["norm_eps"]),
            logit_gain=float(d.get("logit_gain", 1.0)),
        )


@dataclass(frozen=True)
class DecoderModel:
    key_seed: int
    config: DecoderConfig
    weights: tuple = field(repr=False)  # per block: (w (cout,cin,kw), b (cout,))

    def digest(self) -> str:
        h = hashlib.sha256()
        for w, b in self.weights:
            h.update(np.ascontiguousarray(w, dtype="<f4").tobytes())
            h.update(np.ascontiguousarray(b, dtype="<f4").tobytes())
        return h.hexdigest()


def init_decoder(key_seed: int, config: DecoderConfig | None = None) -> DecoderModel:
    """Deterministically draw all block weights from the key."""
    config = config or DecoderConfig()
    stream = SplitMix64(key_seed)
    weights = []
    for cin, cout, kw in config.blocks:
        fan_in = cin * kw
        gain = np.sqrt(2.0 / (1.0 + config.leaky_slope**2))
        wb = np.float32(np.sqrt(6.0 / fan_in) * gain)
        bb = np.float32(1.0 / np.sqrt(fan_in))
        u = stream.uniforms(cout * cin * kw, np.float32)
        w = ((u * 2.0 - 1.0) * wb).reshape(cout, cin, kw).astype(np.float32)
        ub = stream.uniforms(cout, np.float32)
        b = ((ub * 2.0 - 1.0) * bb).astype(np.float32)
        w.flags.writeable = False
        b.flags.writeable = False
        weights.append((w, b))
    return DecoderModel(key_seed=int(key_seed), config=config, weights=tuple(weights))


def decode(model: DecoderModel, signal: dg.Tensor, message_len: int) -> dg.Tensor:
    """Run the fixed stack on a (1, H) signal -> message_len probabilities.

    conv -> instance-norm -> leaky-relu five times, pool to the message
    length, sigmoid. Differentiable w.r.t. the signal; the weights stay
    frozen constants.
    """
    h = signal.data.shape[1]
    if message_len > h:
        raise DecoderConfigError(f"message length {message_len} exceeds signal length {h}")
    x = signal
    cfg = model.config
    for (cin, cout, kw), (w, b) in zip(cfg.blocks, model.weights):
        x = dg.conv1d(x, dg.Tensor(w), dg.Tensor(b), padding=(kw - 1) // 2)
        x = dg.instance_norm1d(x, eps=cfg.norm_eps)
        x = dg.leaky_relu(x, slope=cfg.leaky_slope)
    x = dg.adaptive_avg_pool1d(x, message_len)
    if cfg.logit_gain != 1.0:
        x = dg.mul(x, cfg.logit_gain)
    return dg.sigmoid(x)


def decode_array(model: DecoderModel, signal: np.ndarray, message_len: int) -> np.ndarray:
    """Forward-only decode of a plain (H,) or (1, H) float array."""
    arr = np.asarray(signal, dtype=np.float32).reshape(1, -1)
    return decode(model, dg.Tensor(arr), message_len).data[0]


def harden(probabilities: np.ndarray) -> np.ndarray:
    """Probabilities -> bits; ties at 0.5 go to 1."""
    p = probabilities.data if isinstance(probabilities, dg.Tensor) else probabilities
    return (np.asarray(p).reshape(-1) >= 0.5).astype(np.uint8)


# --- key files -------------------------------------------------------------


def key_to_json(key_seed: int, config: DecoderConfig) -> str:
    return json.dumps(
        {"seed": f"{key_seed & (2**64 - 1):016x}", "config": config.to_dict()},
        indent=2,
        sort_keys=True,
    )


def key_from_json(text: str) -> tuple[int, DecoderConfig]:
    try:
        doc = json.loads(text)
        seed = int(doc["seed"], 16)
        config = DecoderConfig.from_dict(doc["config"])
    except (KeyError, ValueError, TypeError) as e:
        raise DecoderConfigError(f"bad key file: {e}") from e
    return seed, config
