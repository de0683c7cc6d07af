"""Pretrained-checkpoint backends (the ``models`` extra).

Imported only when a ServerConfig names a non-toy identifier, so the base
install never pays the torch import.  Every constructor failure is wrapped in
ModelLoadError: a bad identifier must abort startup, not a request.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .backends import ModelLoadError
from .config import GREEDY

_LABELS = ("entailment", "neutral", "contradiction")


def _import_torch_transformers():
    try:
        import torch
        import transformers
    except ImportError as exc:
        raise ModelLoadError(
            "pretrained checkpoints need the 'models' extra (torch, transformers)"
        ) from exc
    return torch, transformers


def _load(factory, model_id: str):
    try:
        return factory(model_id)
    except Exception as exc:
        raise ModelLoadError(f"could not load {model_id!r}: {exc}") from exc


def _label_permutation(id2label: dict) -> list[int]:
    """Map model output indices to (entailment, neutral, contradiction) order."""
    by_name: dict[str, int] = {}
    for idx, name in id2label.items():
        lowered = str(name).lower()
        for canon in _LABELS:
            if lowered.startswith(canon[:7]):
                by_name[canon] = int(idx)
    if len(by_name) != 3:
        raise ModelLoadError(
            f"model labels {sorted(map(str, id2label.values()))} do not cover "
            "entailment/neutral/contradiction"
        )
    return [by_name[c] for c in _LABELS]


class HfPairClassifier:
    def __init__(self, model_id: str):
        torch, transformers = _import_torch_transformers()
        self._torch = torch
        self._tok = _load(transformers.AutoTokenizer.from_pretrained, model_id)
        self._model = _load(
            transformers.AutoModelForSequenceClassification.from_pretrained, model_id
        )
        self._model.eval()
        self._perm = _label_permutation(self._model.config.id2label)

    def classify_pair(self, premise: str, hypothesis: str) -> np.ndarray:
        enc = self._tok(premise, hypothesis, return_tensors="pt")
        with self._torch.no_grad():
            logits = self._model(**enc).logits[0]
        probs = self._torch.softmax(logits, dim=-1).numpy()
        return np.asarray([probs[i] for i in self._perm], dtype=np.float64)

    def pair_token_count(self, premise: str, hypothesis: str) -> int:
        return len(self._tok(premise, hypothesis)["input_ids"])


class HfExplanationClassifier:
    def __init__(self, model_id: str):
        torch, transformers = _import_torch_transformers()
        self._torch = torch
        self._tok = _load(transformers.AutoTokenizer.from_pretrained, model_id)
        self._model = _load(
            transformers.AutoModelForSequenceClassification.from_pretrained, model_id
        )
        self._model.eval()
        self._perm = _label_permutation(self._model.config.id2label)

    def classify_text(self, text: str) -> np.ndarray:
        enc = self._tok(text, return_tensors="pt")
        with self._torch.no_grad():
            logits = self._model(**enc).logits[0]
        probs = self._torch.softmax(logits, dim=-1).numpy()
        return np.asarray([probs[i] for i in self._perm], dtype=np.float64)

    def count_tokens(self, text: str) -> int:
        return len(self._tok(text)["input_ids"])


class HfExplainer:
    def __init__(self, model_id: str, max_tokens: int, decoding: str):
        torch, transformers = _import_torch_transformers()
        self._torch = torch
        self._tok = _load(transformers.AutoTokenizer.from_pretrained, model_id)
        self._model = _load(transformers.AutoModelForSeq2SeqLM.from_pretrained, model_id)
        self._model.eval()
        self._max_tokens = max_tokens
        self._decoding = decoding

    def explain(self, premise: str, hypothesis: str) -> str:
        text = f"premise: {premise} hypothesis: {hypothesis}"
        enc = self._tok(text, return_tensors="pt")
        sample = self._decoding != GREEDY
        if sample:
            # Seed from the request so sampled decoding is still a function
            # of (inputs, weights).
            self._torch.manual_seed(hash((premise, hypothesis)) & 0x7FFFFFFF)
        with self._torch.no_grad():
            ids = self._model.generate(
                **enc,
                max_new_tokens=self._max_tokens,
                num_beams=1,
                do_sample=sample,
            )
        return self._tok.decode(ids[0], skip_special_tokens=True).strip()

    def pair_token_count(self, premise: str, hypothesis: str) -> int:
        text = f"premise: {premise} hypothesis: {hypothesis}"
        return len(self._tok(text)["input_ids"])


class HfEmbedder:
    def __init__(self, model_id: str):
        torch, transformers = _import_torch_transformers()
        self._torch = torch
        self._tok = _load(transformers.AutoTokenizer.from_pretrained, model_id)
        self._model = _load(transformers.AutoModel.from_pretrained, model_id)
        self._model.eval()

    def embed_one(self, text: str) -> np.ndarray:
        enc = self._tok(text, return_tensors="pt")
        with self._torch.no_grad():
            hidden = self._model(**enc).last_hidden_state[0]
        mask = enc["attention_mask"][0].unsqueeze(-1)
        pooled = (hidden * mask).sum(dim=0) / mask.sum()
        return pooled.numpy().astype(np.float64)

    def count_tokens(self, text: str) -> int:
        return len(self._tok(text)["input_ids"])


class HfMlmProvider:
    def __init__(self, model_id: str):
        torch, transformers = _import_torch_transformers()
        self._torch = torch
        self._tok = _load(transformers.AutoTokenizer.from_pretrained, model_id)
        self._model = _load(transformers.AutoModelForMaskedLM.from_pretrained, model_id)
        self._model.eval()
        if self._tok.mask_token is None:
            raise ModelLoadError(f"{model_id!r} has no mask token; not a masked LM")

    def candidates(self, tokens: Sequence[str], mask_index: int, k: int) -> list[str]:
        words = list(tokens)
        words[mask_index] = self._tok.mask_token
        enc = self._tok(" ".join(words), return_tensors="pt")
        positions = (enc["input_ids"][0] == self._tok.mask_token_id).nonzero()
        if len(positions) == 0:
            return []
        with self._torch.no_grad():
            logits = self._model(**enc).logits[0, int(positions[0])]
        top = logits.topk(max(k, 0) + 1).indices.tolist()
        out: list[str] = []
        for tok_id in top:
            piece = self._tok.convert_ids_to_tokens(tok_id).lstrip("▁Ġ")
            if piece and piece != tokens[mask_index] and len(out) < max(k, 0):
                out.append(piece)
        return out
