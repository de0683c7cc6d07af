"""Command-line entry point: build a ServerConfig from flags and serve."""

from __future__ import annotations

import argparse
import sys

from .app import serve
from .backends import ModelLoadError
from .config import (
    DECODING_STRATEGIES,
    DEFAULT_DECODER_MAX_LENGTH,
    DEFAULT_ENCODER_MAX_LENGTH,
    GREEDY,
    TOY_MODEL,
    ServerConfig,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="explattack-model-server",
        description="Serve NLI models over the victim wire protocol.",
    )
    parser.add_argument(
        "--classifier-model",
        default=TOY_MODEL,
        help="pair-classifier checkpoint, or 'toy' (default: %(default)s)",
    )
    parser.add_argument(
        "--explainer-model",
        default=TOY_MODEL,
        help="explanation-generator checkpoint, or 'toy' (default: %(default)s)",
    )
    parser.add_argument(
        "--expl-classifier-model",
        default=TOY_MODEL,
        help="explanation-classifier checkpoint, or 'toy' (default: %(default)s)",
    )
    parser.add_argument(
        "--embedder-model",
        default=TOY_MODEL,
        help="sentence-embedding checkpoint, or 'toy' (default: %(default)s)",
    )
    parser.add_argument(
        "--mlm-model",
        default=TOY_MODEL,
        help="masked-LM checkpoint, or 'toy' (default: %(default)s)",
    )
    parser.add_argument(
        "--host", default="127.0.0.1", help="listen address (default: %(default)s)"
    )
    parser.add_argument(
        "--port", type=int, default=8000, help="listen port (default: %(default)s)"
    )
    parser.add_argument(
        "--encoder-max-length",
        type=int,
        default=DEFAULT_ENCODER_MAX_LENGTH,
        help="reject inputs longer than this many tokens (default: %(default)s)",
    )
    parser.add_argument(
        "--decoder-max-length",
        type=int,
        default=DEFAULT_DECODER_MAX_LENGTH,
        help="cap generated explanations at this many tokens (default: %(default)s)",
    )
    parser.add_argument(
        "--decoding",
        choices=DECODING_STRATEGIES,
        default=GREEDY,
        help="explanation decoding strategy (default: %(default)s)",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = ServerConfig(
            classifier_model=args.classifier_model,
            explainer_model=args.explainer_model,
            expl_classifier_model=args.expl_classifier_model,
            embedder_model=args.embedder_model,
            mlm_model=args.mlm_model,
            host=args.host,
            port=args.port,
            encoder_max_length=args.encoder_max_length,
            decoder_max_length=args.decoder_max_length,
            decoding=args.decoding,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        serve(config)
    except ModelLoadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
