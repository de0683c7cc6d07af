"""HTTP adapter that serves classifier, explainer, embedding, and masked-LM
models over the victim wire protocol used by the explattack harness."""

from .app import build_app, serve
from .backends import Backends, ModelLoadError, load_backends
from .config import (
    DECODING_STRATEGIES,
    DEFAULT_DECODER_MAX_LENGTH,
    DEFAULT_ENCODER_MAX_LENGTH,
    GREEDY,
    SAMPLED,
    TOY_MODEL,
    ServerConfig,
)

__version__ = "0.1.0"

__all__ = [
    "Backends",
    "DECODING_STRATEGIES",
    "DEFAULT_DECODER_MAX_LENGTH",
    "DEFAULT_ENCODER_MAX_LENGTH",
    "GREEDY",
    "SAMPLED",
    "ServerConfig",
    "TOY_MODEL",
    "ModelLoadError",
    "build_app",
    "load_backends",
    "serve",
]
