"""The embedding engine: iterative optimization of a bounded perturbation so
the key-seeded decoder recovers the message from the stego signal.

Per iteration: build the stego (cover + delta, projected to [-1, 1] and, by
default, snapped to the PCM16 grid through a straight-through quantizer,
since the channel transmits WAV), decode it, optionally attack it per the
curriculum and decode the attacked copy, assemble the weighted loss, take an
Adam step on delta and re-project to the [-eps, eps] box.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import diffgraph as dg
from .attacks import Curriculum, apply_attack, schedule
from .decoder import DecoderModel, decode, harden
from .rng import SplitMix64
from .wavio import SCALE, quantize_samples

BCE_CLAMP = 1e-7


class EmbedError(ValueError):
    pass


@dataclass(frozen=True)
class EmbedConfig:
    eps: float = 1e-3
    alpha: float = 1.0
    beta: float = 0.5
    gamma_ramp_start: int = 1500
    gamma_final: float = 0.01
    iterations: int = 2000
    lr: float = 1e-3
    lr_floor_frac: float = 0.1  # initial lr decays linearly to this fraction
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    robust: bool = False
    omega_warmup: int = 500
    omega_decay_end: int = 1500
    omega_final: float = 0.4
    pcm_aware: bool = True  # quantize the stego in-loop (STE)
    delta_mode: bool = True  # decode the residual stego - cover (default; see README)
    bound_mode: str = "tanh"  # "tanh" (smooth bound) or "project" (hard clip)
    init_spread: float = 0.5  # seeded uniform start; 0 reproduces the all-zero start
    early_exit: bool = False
    trace_every: int = 1

    def __post_init__(self):
        if self.eps <= 0:
            raise EmbedError(f"eps must be positive, got {self.eps}")
        if self.iterations < 0:
            raise EmbedError("iterations must be >= 0")
        if self.lr <= 0:
            raise EmbedError("learning rate must be positive")
        if self.gamma_final < 0 or self.alpha < 0 or self.beta < 0:
            raise EmbedError("loss weights must be >= 0")
        if not 0.0 <= self.omega_final <= 1.0:
            raise EmbedError("omega must stay in [0, 1]")
        if self.bound_mode not in ("project", "tanh"):
            raise EmbedError(f"bound_mode must be 'project' or 'tanh', got {self.bound_mode}")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d: dict) -> "EmbedConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass
class EmbedResult:
    stego: np.ndarray  # quantized stego samples, (H,)
    delta: np.ndarray  # final raw perturbation, (H,)
    trace: list  # rows: (iteration, l1, l2, l3, total, accuracy)
    clean_accuracy: float
    iterations_run: int
    wall_time: float
    psnr_db: float = float("nan")


# ---------------------------------------------------------------------------
# losses and schedules
# ---------------------------------------------------------------------------


def loss_l1(stego: dg.Tensor, cover: dg.Tensor) -> dg.Tensor:
    """Mean squared error between stego and cover."""
    if stego.data.shape != cover.data.shape:
        raise EmbedError(f"loss_l1 length mismatch {stego.shape} vs {cover.shape}")
    d = dg.sub(stego, cover)
    return dg.mean_all(dg.mul(d, d))


def loss_l2(message: np.ndarray, probs: dg.Tensor) -> dg.Tensor:
    """Binary cross-entropy; probabilities are clamped to [1e-7, 1-1e-7]
    before the logs.

    Fused op: the backward slope is the clamped-point derivative everywhere
    (no dead zone), so bits whose probabilities start pinned at a clamp edge
    still receive a restoring gradient.
    """
    m = np.asarray(message, dtype=probs.data.dtype).reshape(probs.data.shape)
    if m.size != probs.data.size:
        raise EmbedError(f"loss_l2 length mismatch {m.size} vs {probs.data.size}")
    k = m.size
    pc = np.clip(probs.data, BCE_CLAMP, 1.0 - BCE_CLAMP)
    val = -(m * np.log(pc) + (1.0 - m) * np.log(1.0 - pc)).mean(dtype=probs.data.dtype)
    out = dg.Tensor(val, parents=(probs,), op="bce")

    def bwd(g):
        if probs.requires_grad:
            probs.accumulate((g / k) * (-m / pc + (1.0 - m) / (1.0 - pc)))

    out._backward = bwd
    return out


def loss_l3(detector_probs: list[dg.Tensor]) -> dg.Tensor:
    """-sum_k log(1 - J_k): drives every detector's stego probability to 0."""
    if not detector_probs:
        raise EmbedError("loss_l3 needs at least one detector probability")
    total = None
    for j in detector_probs:
        jc = dg.clamp(j, BCE_CLAMP, 1.0 - BCE_CLAMP)
        term = dg.mul(dg.log(dg.add(dg.mul(jc, -1.0), 1.0)), -1.0)
        total = term if total is None else dg.add(total, term)
    return dg.sum_all(total)


def loss_robust(message, probs_clean: dg.Tensor, probs_attacked: dg.Tensor, omega: float) -> dg.Tensor:
    """omega * BCE(clean) + (1 - omega) * BCE(attacked)."""
    if not 0.0 <= omega <= 1.0:
        raise EmbedError(f"omega must be in [0, 1], got {omega}")
    clean = loss_l2(message, probs_clean)
    attacked = clean if probs_attacked is probs_clean else loss_l2(message, probs_attacked)
    return dg.add(dg.mul(clean, omega), dg.mul(attacked, 1.0 - omega))


def total_loss(l1: dg.Tensor, l2: dg.Tensor, l3: dg.Tensor | None, alpha: float, beta: float, gamma: float) -> dg.Tensor:
    out = dg.add(dg.mul(l1, alpha), dg.mul(l2, beta))
    if l3 is not None and gamma > 0.0:
        out = dg.add(out, dg.mul(l3, gamma))
    return out


def gamma_at(i: int, cfg: EmbedConfig) -> float:
    """0 through the ramp start, then linear up to gamma_final at the end."""
    n = cfg.iterations
    if i <= cfg.gamma_ramp_start or cfg.gamma_final == 0.0:
        return 0.0
    span = max(n - cfg.gamma_ramp_start, 1)
    return cfg.gamma_final * min(i - cfg.gamma_ramp_start, span) / span

def omega_at(i: int, cfg: EmbedConfig) -> float:
    """1.0 during warmup, linear decay to omega_final, then flat."""
    if i <= cfg.omega_warmup:
        return 1.0
    if i >= cfg.omega_decay_end:
        return cfg.omega_final
    frac = (i - cfg.omega_warmup) / (cfg.omega_decay_end - cfg.omega_warmup)
    return 1.0 + (cfg.omega_final - 1.0) * frac


def lr_at(i: int, cfg: EmbedConfig) -> float:
    """Linear decay from the initial rate to lr * lr_floor_frac at the end."""
    n = max(cfg.iterations, 1)
    frac = (i - 1) / n
    return cfg.lr * (1.0 + (cfg.lr_floor_frac - 1.0) * frac)


class AdamState:
    """Standard Adam with bias correction over one flat parameter array."""

    def __init__(self, shape, dtype, beta1: float, beta2: float, eps: float):
        self.m = np.zeros(shape, dtype=dtype)
        self.v = np.zeros(shape, dtype=dtype)
        self.t = 0
        self.beta1, self.beta2, self.eps = beta1, beta2, eps

    def step(self, params: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        self.m = b1 * self.m + (1.0 - b1) * grad
        self.v = b2 * self.v + (1.0 - b2) * (grad * grad)
        mhat = self.m / (1.0 - b1**self.t)
        vhat = self.v / (1.0 - b2**self.t)
        return params - np.asarray(lr, params.dtype) * mhat / (np.sqrt(vhat) + self.eps)


def adam_step(state: AdamState, params: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
    return state.step(params, grad, lr)


def project(x: np.ndarray, lo: float, hi: float) -> np.ndarray:
    if lo > hi:
        raise EmbedError(f"project needs lo <= hi, got {lo} > {hi}")
    return np.clip(x, lo, hi)


# ---------------------------------------------------------------------------
# the optimization loop
# ---------------------------------------------------------------------------


def embed(
    cover: np.ndarray,
    message: np.ndarray,
    model: DecoderModel,
    config: EmbedConfig,
    rng: SplitMix64 | None = None,
    curriculum: Curriculum | None = None,
    detectors: tuple = (),
    sample_rate: int = 16000,
) -> EmbedResult:
    """Optimize delta for one clip. Deterministic given (cover, message,
    model, config, rng seed)."""
    t_start = time.perf_counter()
    cover = np.asarray(cover, dtype=np.float32).reshape(1, -1)
    message = np.asarray(message, dtype=np.uint8).reshape(-1)
    h = cover.shape[1]
    k = message.size
    if k > h:
        raise EmbedError(f"message length {k} exceeds signal length {h}")
    if config.robust and curriculum is None:
        curriculum = Curriculum(stages=(), warmup=0)
    needs_gamma = config.gamma_final > 0.0 and config.gamma_ramp_start < config.iterations
    if needs_gamma and not detectors:
        raise EmbedError("gamma schedule is active but no detectors were supplied")
    rng = rng or SplitMix64(0)
    cover_power = float(np.mean(cover.astype(np.float64) ** 2))
    step = np.float32(1.0 / SCALE)

    # raw parameter (delta itself, or its tanh preimage). The all-zero start
    # is a symmetric saddle (constant activations under instance norm), so
    # default to a small seeded uniform spread around it.
    theta = ((rng.uniforms(h, np.float32) * 2.0 - 1.0) * np.float32(config.init_spread)).reshape(1, h)
    if config.bound_mode == "project":
        theta *= np.float32(config.eps)
    adam = AdamState(theta.shape, np.float32, config.adam_beta1, config.adam_beta2, config.adam_eps)
    cover_t = dg.Tensor(cover)
    trace: list = []
    accuracy = 0.0
    iterations_run = 0

    def build_delta(theta_t: dg.Tensor) -> dg.Tensor:
        if config.bound_mode == "tanh":
            return dg.mul(dg.tanh(theta_t), config.eps)
        return theta_t

    for i in range(1, config.iterations + 1):
        theta_t = dg.Tensor(theta, requires_grad=True)
        delta_t = build_delta(theta_t)
        stego_f = dg.clamp(dg.add(cover_t, delta_t), -1.0, 1.0)
        stego_t = dg.quantize_ste(stego_f, step) if config.pcm_aware else stego_f

        clean_in = dg.sub(stego_t, cover_t) if config.delta_mode else stego_t
        probs_clean = decode(model, clean_in, k)

        attacked_probs = probs_clean
        if config.robust:
            spec = schedule(curriculum, i) if curriculum.stages else None
            if spec is not None and spec.kind != "none":
                attacked = apply_attack(stego_t, spec, sample_rate, rng=rng, ref_power=cover_power)
                att_in = dg.sub(attacked, cover_t) if config.delta_mode else attacked
                attacked_probs = decode(model, att_in, k)
            l2 = loss_robust(message, probs_clean, attacked_probs, omega_at(i, config))
        else:
            l2 = loss_l2(message, probs_clean)

        l1 = loss_l1(stego_t, cover_t)
        gamma = gamma_at(i, config)
        l3 = None
        if gamma > 0.0 and detectors:
            from .detectors import detect  # local import to avoid a cycle

            l3 = loss_l3([detect(d, stego_t) for d in detectors])
        loss = total_loss(l1, l2, l3, config.alpha, config.beta, gamma)
        if not np.isfinite(loss.data):
            raise EmbedError(f"non-finite loss at iteration {i}: trace={trace[-3:]}")

        dg.backward(loss)
        grad = theta_t.grad
        theta = adam.step(theta, grad, lr_at(i, config))
        if config.bound_mode == "project":
            theta = project(theta, -config.eps, config.eps)

        # loop invariants: delta stays in the eps box, stego stays in range
        if config.bound_mode == "project" and np.abs(theta).max() > config.eps:
            raise EmbedError(f"delta bound violated at iteration {i}")
        if np.abs(stego_t.data).max() > 1.0:
            raise EmbedError(f"stego range violated at iteration {i}")

        accuracy = float(100.0 * np.mean(harden(probs_clean) == message))
        iterations_run = i
        if i % config.trace_every == 0 or i == config.iterations:
            l3v = float(l3.data) if l3 is not None else 0.0
            trace.append((i, float(l1.data), float(l2.data), l3v, float(loss.data), accuracy))
        if (
            config.early_exit
            and accuracy == 100.0
            and not needs_gamma
            and i >= (config.omega_decay_end if config.robust else 0)
        ):
            break

    # final artifacts from the converged parameters
    delta = build_delta(dg.Tensor(theta)).data
    stego_float = project(cover + delta, -1.0, 1.0)
    stego_q = quantize_samples(stego_float[0])
    final_in = stego_q[None, :] - cover if config.delta_mode else stego_q[None, :]
    probs = decode(model, dg.Tensor(final_in), k)
    clean_acc = float(100.0 * np.mean(harden(probs) == message))
    mse = float(np.mean((stego_q.astype(np.float64) - cover[0].astype(np.float64)) ** 2))
    psnr = 200.0 if mse < 1e-20 else float(10.0 * np.log10(1.0 / mse))
    return EmbedResult(
        stego=stego_q,
        delta=delta[0].copy(),
        trace=trace,
        clean_accuracy=clean_acc,
        iterations_run=iterations_run,
        wall_time=time.perf_counter() - t_start,
        psnr_db=psnr,
    )
