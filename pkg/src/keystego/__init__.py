"""keystego: hide bits in lossless audio by optimizing a bounded
perturbation against a key-seeded, never-trained decoder network."""

__version__ = "0.1.0"

from .wavio import AudioClip, fit_length, read_wav, write_wav  # noqa: F401
from .decoder import DecoderConfig, DecoderModel, decode, harden, init_decoder  # noqa: F401
from .embedder import EmbedConfig, EmbedResult, embed  # noqa: F401
