"""Server settings: which model backs each endpoint role, where to listen,
and the sequence-length / decoding limits applied at inference time."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Final

DEFAULT_ENCODER_MAX_LENGTH: Final = 128
DEFAULT_DECODER_MAX_LENGTH: Final = 64

GREEDY: Final = "greedy"
SAMPLED: Final = "sampled"
DECODING_STRATEGIES: Final = (GREEDY, SAMPLED)

#: Identifier that selects the self-contained deterministic backend instead of
#: a pretrained checkpoint.  Anything else is treated as a local path or hub id.
TOY_MODEL: Final = "toy"


@dataclass(frozen=True, slots=True)
class ServerConfig:
    """One model identifier per endpoint role plus listen and limit settings.

    Identifiers equal to ``"toy"`` load the built-in deterministic models;
    all other values are resolved as pretrained checkpoints (local directory
    or hub id), which requires the ``models`` extra.
    """

    classifier_model: str = TOY_MODEL
    explainer_model: str = TOY_MODEL
    expl_classifier_model: str = TOY_MODEL
    embedder_model: str = TOY_MODEL
    mlm_model: str = TOY_MODEL
    host: str = "127.0.0.1"
    port: int = 8000
    encoder_max_length: int = DEFAULT_ENCODER_MAX_LENGTH
    decoder_max_length: int = DEFAULT_DECODER_MAX_LENGTH
    decoding: str = GREEDY

    def __post_init__(self) -> None:
        for role in (
            "classifier_model",
            "explainer_model",
            "expl_classifier_model",
            "embedder_model",
            "mlm_model",
        ):
            value = getattr(self, role)
            if not isinstance(value, str) or not value.strip():
                raise ValueError(f"{role} must be a non-empty model identifier")
        if not self.host:
            raise ValueError("host must be non-empty")
        # Port 0 asks the OS for an ephemeral port, which tests rely on.
        if not 0 <= self.port <= 65535:
            raise ValueError(f"port must be in [0, 65535], got {self.port}")
        if self.encoder_max_length < 1:
            raise ValueError(
                f"encoder_max_length must be positive, got {self.encoder_max_length}"
            )
        if self.decoder_max_length < 1:
            raise ValueError(
                f"decoder_max_length must be positive, got {self.decoder_max_length}"
            )
        if self.decoding not in DECODING_STRATEGIES:
            raise ValueError(
                f"decoding must be one of {DECODING_STRATEGIES}, got {self.decoding!r}"
            )
