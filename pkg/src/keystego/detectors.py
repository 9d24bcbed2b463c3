"""Surrogate steganalyzers: small trainable CNNs over raw waveforms.

Two structurally distinct variants exist so that one can drive the
anti-detection loss while the other stays held out as an "unseen" detector
for cross-model evaluation. Each starts with a fixed (non-trainable)
high-pass residual kernel, then strided conv blocks, global average
pooling and a 2-logit head. The stego probability is the stable softmax
p1 = sigmoid(s1 - s0).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import diffgraph as dg
from .embedder import AdamState, BCE_CLAMP
from .rng import SplitMix64

# (front taps, channel chain, kernel width); fronts are embedded in odd
# width-3 kernels, B's [1,-1] carries a trailing structural zero
VARIANTS = {
    "A": ((1.0, -2.0, 1.0), (1, 8, 16, 32, 64), 7),
    "B": ((1.0, -1.0, 0.0), (1, 12, 24, 48), 11),
}
MIN_LEN = 64


class DetectorError(ValueError):
    pass


@dataclass(frozen=True)
class DetectorModel:
    variant: str
    seed: int
    front: np.ndarray = field(repr=False)
    blocks: tuple = field(repr=False)  # ((w, b), ...) trainable conv stacks
    head: tuple = field(repr=False)  # (w (2, c, 1), b (2,))
    epochs_trained: int = 0
    train_accuracy: float = float("nan")

    def param_arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in self.blocks:
            out.extend([w, b])
        out.extend([self.head[0], self.head[1]])
        return out


def init_detector(seed: int, variant: str) -> DetectorModel:
    """Deterministic key-seeded initialization, same draw scheme as the
    decoder (kaiming-uniform for the leaky slope, biases in 1/sqrt(fan))."""
    if variant not in VARIANTS:
        raise DetectorError(f"unknown detector variant {variant!r}")
    taps, channels, kw = VARIANTS[variant]
    stream = SplitMix64(seed)
    slope = 0.2
    gain = np.sqrt(2.0 / (1.0 + slope**2))

    def draw(cout, cin, width):
        fan_in = cin * width
        wb = np.float32(np.sqrt(6.0 / fan_in) * gain)
        u = stream.uniforms(cout * cin * width, np.float32)
        w = ((u * 2.0 - 1.0) * wb).reshape(cout, cin, width).astype(np.float32)
        ub = stream.uniforms(cout, np.float32)
        b = ((ub * 2.0 - 1.0) * np.float32(1.0 / np.sqrt(fan_in))).astype(np.float32)
        return w, b

    blocks = tuple(draw(channels[i + 1], channels[i], kw) for i in range(len(channels) - 1))
    head = draw(2, channels[-1], 1)
    front = np.asarray(taps, dtype=np.float32).reshape(1, 1, 3)
    return DetectorModel(variant=variant, seed=int(seed), front=front, blocks=blocks, head=head)


def _forward_logits(model: DetectorModel, signal: dg.Tensor, params: list[dg.Tensor] | None = None):
    """Residual front -> strided conv blocks -> GAP -> 2-logit head.

    params, when given, are Tensors replacing the stored arrays (training).
    """
    if signal.data.shape[1] < MIN_LEN:
        raise DetectorError(f"detector input must have length >= {MIN_LEN}")
    kw = VARIANTS[model.variant][2]
    x = dg.conv1d(signal, dg.Tensor(model.front), dg.Tensor(np.zeros(1, dtype=np.float32)), padding=1)
    idx = 0

    def param(arr):
        nonlocal idx
        t = params[idx] if params is not None else dg.Tensor(arr)
        idx += 1
        return t

    for w, b in model.blocks:
        x = dg.conv1d(x, param(w), param(b), padding=(kw - 1) // 2, stride=2)
        x = dg.leaky_relu(x, 0.2)
    x = dg.adaptive_avg_pool1d(x, 1)
    return dg.conv1d(x, param(model.head[0]), param(model.head[1]), padding=0)


def detect(model: DetectorModel, signal: dg.Tensor, params=None) -> dg.Tensor:
    """Probability the signal carries a payload, differentiable w.r.t. it."""
    logits = _forward_logits(model, signal, params)
    s0 = dg.slice_channels(logits, 0, 1)
    s1 = dg.slice_channels(logits, 1, 1)
    return dg.sigmoid(dg.sub(s1, s0))


def detect_array(model: DetectorModel, signal: np.ndarray) -> float:
    arr = np.asarray(signal, dtype=np.float32).reshape(1, -1)
    return float(detect(model, dg.Tensor(arr)).data)


def train_detector(
    model: DetectorModel,
    covers: list[np.ndarray],
    stegos: list[np.ndarray],
    epochs: int = 30,
    lr: float = 1e-3,
    rng: SplitMix64 | None = None,
    batch_pairs: int = 8,
) -> DetectorModel:
    """Minimize the paired-batch cross-entropy (label 0 cover / 1 stego)
    with Adam; returns a trained copy carrying its final train accuracy."""
    if not covers or len(covers) != len(stegos):
        raise DetectorError(f"need equal non-empty sets, got {len(covers)} covers, {len(stegos)} stegos")
    rng = rng or SplitMix64(0)
    arrays = [np.array(a, dtype=np.float32, copy=True) for a in model.param_arrays()]
    adams = [AdamState(a.shape, np.float32, 0.9, 0.999, 1e-8) for a in arrays]
    items = [(np.asarray(c, dtype=np.float32).reshape(1, -1), 0.0) for c in covers]
    items += [(np.asarray(s, dtype=np.float32).reshape(1, -1), 1.0) for s in stegos]
    npairs = len(covers)

    work = model
    for _ in range(epochs):
        order = np.argsort(rng.uniforms(npairs, np.float64), kind="stable")
        for lo in range(0, npairs, batch_pairs):
            batch = order[lo:lo + batch_pairs]
            params = [dg.Tensor(a, requires_grad=True) for a in arrays]
            loss = None
            for pair_idx in batch:
                for sig, label in (items[pair_idx], items[npairs + pair_idx]):
                    p = detect(work, dg.Tensor(sig), params=params)
                    pc = dg.clamp(p, BCE_CLAMP, 1.0 - BCE_CLAMP)
                    if label == 1.0:
                        term = dg.mul(dg.log(pc), -1.0)
                    else:
                        term = dg.mul(dg.log(dg.add(dg.mul(pc, -1.0), 1.0)), -1.0)
                    t = dg.sum_all(term)
                    loss = t if loss is None else dg.add(loss, t)
            loss = dg.mul(loss, 1.0 / (2.0 * len(batch)))
            dg.backward(loss)
            for j, (arr, p) in enumerate(zip(arrays, params)):
                g = p.grad if p.grad is not None else np.zeros_like(arr)
                arrays[j] = adams[j].step(arr, g, lr)

    trained = _with_params(model, arrays)
    correct = 0
    for pair_idx in range(npairs):
        for sig, label in (items[pair_idx], items[npairs + pair_idx]):
            correct += int((detect_array(trained, sig) >= 0.5) == bool(label))
    acc = correct / (2.0 * npairs)
    return replace(trained, epochs_trained=model.epochs_trained + epochs, train_accuracy=acc)


def _with_params(model: DetectorModel, arrays: list[np.ndarray]) -> DetectorModel:
    n = len(model.blocks)
    blocks = tuple((arrays[2 * i], arrays[2 * i + 1]) for i in range(n))
    head = (arrays[2 * n], arrays[2 * n + 1])
    return replace(model, blocks=blocks, head=head)


def p_e(model: DetectorModel, covers: list[np.ndarray], stegos: list[np.ndarray]) -> float:
    """Min-over-threshold (false alarm + missed detection) / 2, in [0, ~0.5].

    50% means the detector cannot beat coin flipping.
    """
    if not covers or not stegos:
        raise DetectorError("p_e needs non-empty cover and stego sets")
    c = np.array([detect_array(model, x) for x in covers])
    s = np.array([detect_array(model, x) for x in stegos])
    return p_e_from_scores(c, s)


def p_e_from_scores(cover_scores: np.ndarray, stego_scores: np.ndarray) -> float:
    thresholds = np.concatenate(([-np.inf], np.unique(np.concatenate([cover_scores, stego_scores])), [np.inf]))
    best = 1.0
    for t in thresholds:
        p_fa = float(np.mean(cover_scores >= t))
        p_md = float(np.mean(stego_scores < t))
        best = min(best, 0.5 * (p_fa + p_md))
    return best


# --- checkpoints -----------------------------------------------------------


def save_checkpoint(model: DetectorModel) -> bytes:
    """One JSON header line, then the trainable weights as little-endian f32."""
    arrays = model.param_arrays()
    header = {
        "variant": model.variant,
        "seed": model.seed,
        "epochs": model.epochs_trained,
        "train_accuracy": model.train_accuracy,
        "n_values": int(sum(a.size for a in arrays)),
    }
    payload = b"".join(np.ascontiguousarray(a, dtype="<f4").tobytes() for a in arrays)
    return json.dumps(header, sort_keys=True).encode() + b"\n" + payload


def load_checkpoint(blob: bytes) -> DetectorModel:
    try:
        nl = blob.index(b"\n")
        header = json.loads(blob[:nl])
        model = init_detector(int(header["seed"]), header["variant"])
    except (ValueError, KeyError) as e:
        raise DetectorError(f"bad checkpoint: {e}") from e
    flat = np.frombuffer(blob[nl + 1:], dtype="<f4")
    if flat.size != header["n_values"]:
        raise DetectorError(f"bad checkpoint: expected {header['n_values']} values, got {flat.size}")
    arrays = []
    pos = 0
    for ref in model.param_arrays():
        arrays.append(flat[pos:pos + ref.size].reshape(ref.shape).astype(np.float32))
        pos += ref.size
    out = _with_params(model, arrays)
    return replace(out, epochs_trained=int(header["epochs"]), train_accuracy=float(header.get("train_accuracy", float("nan"))))
