"""Model backends for the five endpoint roles.

The toy backend is fully self-contained: every weight is drawn once from a
seeded generator keyed by the model identifier, so responses depend only on
the request and the identifier.  That gives the server the same determinism
contract as a frozen checkpoint without downloading anything.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .config import GREEDY, TOY_MODEL, ServerConfig


class ModelLoadError(RuntimeError):
    """A backend could not be constructed from its model identifier."""


# ---------------------------------------------------------------------------
# Backend protocols (what app.py calls)


class PairModel(Protocol):
    def classify_pair(self, premise: str, hypothesis: str) -> np.ndarray: ...
    def pair_token_count(self, premise: str, hypothesis: str) -> int: ...


class TextModel(Protocol):
    def classify_text(self, text: str) -> np.ndarray: ...
    def count_tokens(self, text: str) -> int: ...


class GeneratorModel(Protocol):
    def explain(self, premise: str, hypothesis: str) -> str: ...
    def pair_token_count(self, premise: str, hypothesis: str) -> int: ...


class EmbedderModel(Protocol):
    def embed_one(self, text: str) -> np.ndarray: ...
    def count_tokens(self, text: str) -> int: ...


class MlmModel(Protocol):
    def candidates(self, tokens: Sequence[str], mask_index: int, k: int) -> list[str]: ...


@dataclass(frozen=True, slots=True)
class Backends:
    """One loaded model per endpoint role."""

    classifier: PairModel
    explainer: GeneratorModel
    expl_classifier: TextModel
    embedder: EmbedderModel
    mlm: MlmModel


# ---------------------------------------------------------------------------
# Toy backend

TOY_DIM = 12
_TOY_HIDDEN = 16

# Generation vocabulary for the toy explainer and MLM roles.  Small on
# purpose: candidates and explanations stay readable in test failures.
TOY_VOCAB: tuple[str, ...] = (
    "a", "an", "the", "person", "animal", "dog", "cat", "man", "woman",
    "child", "group", "is", "are", "not", "same", "different", "outside",
    "indoors", "running", "sleeping", "eating", "playing", "cannot", "be",
    "while", "there",
)
_EOS = "</s>"


def _stable_seed(*parts: str) -> int:
    joined = "\x1f".join(parts).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(joined, digest_size=8).digest(), "big")


def _token_vector(token: str, salt: str) -> np.ndarray:
    rng = np.random.default_rng(_stable_seed("token", salt, token))
    return rng.standard_normal(TOY_DIM)


def _mean_vector(tokens: Sequence[str], salt: str) -> np.ndarray:
    # Empty input maps to the empty-string token so the result never has
    # zero norm by construction.
    toks = list(tokens) or [""]
    return np.mean([_token_vector(t, salt) for t in toks], axis=0)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = np.exp(logits - logits.max())
    return shifted / shifted.sum()


def _ws_tokens(text: str) -> list[str]:
    return text.split()


class ToyPairClassifier:
    """Fixed-weight softmax head over hashed bag-of-words features."""

    def __init__(self, model_id: str):
        self._salt = model_id
        rng = np.random.default_rng(_stable_seed("pair-weights", model_id))
        self._w = rng.standard_normal((3, 3 * TOY_DIM))
        self._b = rng.standard_normal(3)

    def classify_pair(self, premise: str, hypothesis: str) -> np.ndarray:
        mp = _mean_vector(_ws_tokens(premise), self._salt)
        mh = _mean_vector(_ws_tokens(hypothesis), self._salt)
        phi = np.concatenate([mp, mh, mp * mh])
        return _softmax(self._w @ phi + self._b)

    def pair_token_count(self, premise: str, hypothesis: str) -> int:
        return len(_ws_tokens(premise)) + len(_ws_tokens(hypothesis))


class ToyExplanationClassifier:
    """Same head shape as the pair classifier, over a single text."""

    def __init__(self, model_id: str):
        self._salt = model_id
        rng = np.random.default_rng(_stable_seed("expl-weights", model_id))
        self._w = rng.standard_normal((3, 2 * TOY_DIM))
        self._b = rng.standard_normal(3)

    def classify_text(self, text: str) -> np.ndarray:
        tokens = _ws_tokens(text)
        mean = _mean_vector(tokens, self._salt)
        vecs = [_token_vector(t, self._salt) for t in tokens] or [mean]
        peak = np.max(vecs, axis=0)
        return _softmax(self._w @ np.concatenate([mean, peak]) + self._b)

    def count_tokens(self, text: str) -> int:
        return len(_ws_tokens(text))


class ToyExplainer:
    """Step-wise decoder over TOY_VOCAB with fixed random weights.

    Greedy mode takes the argmax token each step; sampled mode draws from the
    softmax with a generator seeded by the input pair, so both modes return
    the same string for the same request.  A stop-token bonus that grows with
    position keeps toy explanations short of the decoder cap, and a repeat
    penalty keeps greedy decoding out of single-token fixed points.
    """

    _EOS_RAMP = 0.35  # per-step bonus added to the stop token's score
    _REPEAT_PENALTY = 1.5  # per prior emission of the same token

    def __init__(self, model_id: str, max_tokens: int, decoding: str):
        self._salt = model_id
        self._max_tokens = max_tokens
        self._decoding = decoding
        rng = np.random.default_rng(_stable_seed("gen-weights", model_id))
        self._u = rng.standard_normal((_TOY_HIDDEN, 3 * TOY_DIM))
        self._v = rng.standard_normal((len(TOY_VOCAB) + 1, _TOY_HIDDEN))

    def explain(self, premise: str, hypothesis: str) -> str:
        ctx = np.concatenate(
            [
                _mean_vector(_ws_tokens(premise), self._salt),
                _mean_vector(_ws_tokens(hypothesis), self._salt),
            ]
        )
        rng = np.random.default_rng(_stable_seed("sample", self._salt, premise, hypothesis))
        prev = _token_vector("", self._salt)
        out: list[str] = []
        eos_index = len(TOY_VOCAB)
        emitted = np.zeros(len(TOY_VOCAB) + 1)
        for step in range(self._max_tokens):
            state = np.tanh(self._u @ np.concatenate([ctx, prev]))
            scores = self._v @ state - self._REPEAT_PENALTY * emitted
            scores[eos_index] += self._EOS_RAMP * step
            if self._decoding == GREEDY:
                pick = int(np.argmax(scores))
            else:
                pick = int(rng.choice(len(scores), p=_softmax(scores)))
            if pick == eos_index:
                if not out:  # never emit an empty explanation
                    scores[eos_index] = -math.inf
                    pick = int(np.argmax(scores))
                else:
                    break
            word = TOY_VOCAB[pick]
            out.append(word)
            emitted[pick] += 1.0
            prev = _token_vector(word, self._salt)
        return " ".join(out)

    def pair_token_count(self, premise: str, hypothesis: str) -> int:
        return len(_ws_tokens(premise)) + len(_ws_tokens(hypothesis))


class ToyEmbedder:
    """Mean of hashed per-token vectors; never returns a zero-norm vector."""

    def __init__(self, model_id: str):
        self._salt = model_id

    def embed_one(self, text: str) -> np.ndarray:
        return _mean_vector(_ws_tokens(text), self._salt)

    def count_tokens(self, text: str) -> int:
        return len(_ws_tokens(text))


class ToyMlmProvider:
    """Context-conditioned ranking of TOY_VOCAB for a masked position."""

    def __init__(self, model_id: str):
        self._salt = model_id
        rng = np.random.default_rng(_stable_seed("mlm-weights", model_id))
        self._m = rng.standard_normal((_TOY_HIDDEN, TOY_DIM))
        self._out = rng.standard_normal((len(TOY_VOCAB), _TOY_HIDDEN))

    def candidates(self, tokens: Sequence[str], mask_index: int, k: int) -> list[str]:
        context = list(tokens)
        original = context[mask_index]
        context[mask_index] = "[MASK]"
        state = np.tanh(self._m @ _mean_vector(context, self._salt))
        scores = self._out @ state
        # Positional nudge so the same context ranks differently per slot.
        scores += 0.1 * np.sin(np.arange(len(TOY_VOCAB)) * (mask_index + 1))
        ranked = sorted(zip(scores, TOY_VOCAB), key=lambda sw: (-sw[0], sw[1]))
        picked = [w for _, w in ranked if w != original]
        return picked[: max(k, 0)]


# ---------------------------------------------------------------------------
# Loading


def load_backends(config: ServerConfig) -> Backends:
    """Construct one model per role; any failure surfaces at startup.

    Identifiers other than ``"toy"`` are pretrained checkpoints and raise
    ModelLoadError when the checkpoint (or the ``models`` extra) is missing.
    """
    return Backends(
        classifier=_load_pair(config.classifier_model),
        explainer=_load_generator(
            config.explainer_model, config.decoder_max_length, config.decoding
        ),
        expl_classifier=_load_text(config.expl_classifier_model),
        embedder=_load_embedder(config.embedder_model),
        mlm=_load_mlm(config.mlm_model),
    )


def _load_pair(model_id: str) -> PairModel:
    if model_id == TOY_MODEL:
        return ToyPairClassifier(model_id)
    from . import hf

    return hf.HfPairClassifier(model_id)


def _load_text(model_id: str) -> TextModel:
    if model_id == TOY_MODEL:
        return ToyExplanationClassifier(model_id)
    from . import hf

    return hf.HfExplanationClassifier(model_id)


def _load_generator(model_id: str, max_tokens: int, decoding: str) -> GeneratorModel:
    if model_id == TOY_MODEL:
        return ToyExplainer(model_id, max_tokens, decoding)
    from . import hf

    return hf.HfExplainer(model_id, max_tokens, decoding)


def _load_embedder(model_id: str) -> EmbedderModel:
    if model_id == TOY_MODEL:
        return ToyEmbedder(model_id)
    from . import hf

    return hf.HfEmbedder(model_id)


def _load_mlm(model_id: str) -> MlmModel:
    if model_id == TOY_MODEL:
        return ToyMlmProvider(model_id)
    from . import hf

    return hf.HfMlmProvider(model_id)
