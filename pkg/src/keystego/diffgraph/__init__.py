from .core import GraphError, Tensor, backward, leaf
from .gradcheck import grad_check
from .ops import (
    adaptive_avg_pool1d,
    add,
    clamp,
    conv1d,
    div,
    instance_norm1d,
    leaky_relu,
    linear_resample,
    log,
    mean_all,
    mul,
    neg,
    pad_symmetric,
    pow_const,
    quantize_ste,
    sigmoid,
    slice_channels,
    slice_time,
    sqrt,
    sub,
    sum_all,
    tanh,
)
from .spectral import imdct, istft, mdct, stft

__all__ = [
    "GraphError",
    "Tensor",
    "backward",
    "leaf",
    "grad_check",
    "adaptive_avg_pool1d",
    "add",
    "clamp",
    "conv1d",
    "div",
    "instance_norm1d",
    "leaky_relu",
    "linear_resample",
    "log",
    "mean_all",
    "mul",
    "neg",
    "pad_symmetric",
    "pow_const",
    "quantize_ste",
    "sigmoid",
    "slice_channels",
    "slice_time",
    "sqrt",
    "sub",
    "sum_all",
    "tanh",
    "imdct",
    "istft",
    "mdct",
    "stft",
]
