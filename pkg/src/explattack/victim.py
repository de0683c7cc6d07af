"""Victim-model abstractions and desk-scale implementations.

Direct pair classifiers, explainers, explanation classifiers, and their
explain-then-predict composition all live here, together with the linear
victim's trainer, query-counting instrumentation, and HTTP clients for the
remote wire protocol.

The rule-based heads use a fixed 0.9 confidence with the remaining mass
split equally; that number is a heuristic, not a calibrated estimate.
"""
from __future__ import annotations

import threading
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Final, Protocol, Sequence, runtime_checkable

import numpy as np
import requests

from .corpus import LABEL_ORDER, EmbeddingTable, Label, NliExample, tokenize
from .errors import DivergenceError, FeaturizationError, VictimError

PROB_SUM_TOL: Final = 1e-9
WIRE_PROB_SUM_TOL: Final = 1e-6
NEGATION_TOKENS: Final[frozenset[str]] = frozenset({"no", "not", "never", "cannot"})
RULE_CONFIDENCE: Final = 0.9


@dataclass(frozen=True, slots=True)
class ClassifierOutput:
    """Predicted label plus the full 3-way distribution (order E, N, C)."""

    label: Label
    probs: tuple[float, float, float]

    def __post_init__(self) -> None:
        if len(self.probs) != 3:
            raise ValueError("probs must have exactly three entries")
        if any(p < 0.0 or p > 1.0 for p in self.probs):
            raise ValueError(f"probabilities out of [0,1]: {self.probs}")
        if abs(sum(self.probs) - 1.0) > PROB_SUM_TOL:
            raise ValueError(f"probabilities sum to {sum(self.probs)!r}, not 1")
        if self.label is not _argmax_label(self.probs):
            raise ValueError("label does not match argmax of probs")

    @classmethod
    def from_probs(cls, probs: Sequence[float]) -> "ClassifierOutput":
        t = (float(probs[0]), float(probs[1]), float(probs[2]))
        return cls(label=_argmax_label(t), probs=t)

    def p(self, label: Label) -> float:
        return self.probs[LABEL_ORDER.index(label)]

    def to_wire(self) -> dict:
        return {
            "label": self.label.value,
            "probs": {lab.value: self.probs[i] for i, lab in enumerate(LABEL_ORDER)},
        }


def _argmax_label(probs: Sequence[float]) -> Label:
    # Ties break toward the earlier label in the fixed order E < N < C.
    best = 0
    for i in (1, 2):
        if probs[i] > probs[best]:
            best = i
    return LABEL_ORDER[best]


@runtime_checkable
class PairClassifier(Protocol):
    def classify(self, premise: str, hypothesis: str) -> ClassifierOutput: ...


@runtime_checkable
class Explainer(Protocol):
    def explain(self, premise: str, hypothesis: str) -> str: ...


@runtime_checkable
class ExplanationClassifier(Protocol):
    def classify_explanation(self, explanation: str) -> ClassifierOutput: ...


@runtime_checkable
class SentenceEncoder(Protocol):
    def encode(self, texts: Sequence[str]) -> list[np.ndarray | None]: ...


@runtime_checkable
class CandidateProvider(Protocol):
    def candidates(self, tokens: Sequence[str], mask_index: int, k: int) -> list[str]: ...


# ---------------------------------------------------------------------------
# Linear victim


@dataclass(frozen=True, slots=True)
class LinearModel:
    """Softmax-regression parameters: weights (3, F) and bias (3,)."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self) -> None:
        if self.weights.ndim != 2 or self.weights.shape[0] != 3:
            raise ValueError(f"weights must be (3, F), got {self.weights.shape}")
        if self.bias.shape != (3,):
            raise ValueError(f"bias must be (3,), got {self.bias.shape}")
        if not (np.isfinite(self.weights).all() and np.isfinite(self.bias).all()):
            raise ValueError("model parameters must be finite")


def featurize(
    premise_tokens: Sequence[str],
    hypothesis_tokens: Sequence[str],
    table: EmbeddingTable,
) -> np.ndarray:
    """[mean(P); mean(H); |mean(P)-mean(H)|; mean(P)*mean(H)], OOV skipped."""

    def mean_vec(tokens: Sequence[str], side: str) -> np.ndarray:
        vecs = [v for t in tokens if (v := table.lookup(t)) is not None]
        if not vecs:
            raise FeaturizationError(f"every {side} token is out of vocabulary")
        return np.mean(vecs, axis=0)

    p = mean_vec(premise_tokens, "premise")
    h = mean_vec(hypothesis_tokens, "hypothesis")
    return np.concatenate([p, h, np.abs(p - h), p * h])


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exps = np.exp(shifted)
    return exps / exps.sum(axis=-1, keepdims=True)


def linear_classify(model: LinearModel, features: np.ndarray) -> ClassifierOutput:
    features = np.asarray(features, dtype=np.float64)
    if features.shape != (model.weights.shape[1],):
        raise ValueError(
            f"feature length {features.shape} does not match model F={model.weights.shape[1]}"
        )
    probs = _softmax(model.weights @ features + model.bias)
    return ClassifierOutput.from_probs(probs / probs.sum())


class LinearVictim:
    """PairClassifier backed by a LinearModel over mean-embedding features."""

    def __init__(self, model: LinearModel, table: EmbeddingTable):
        self.model = model
        self.table = table

    def classify(self, premise: str, hypothesis: str) -> ClassifierOutput:
        try:
            feats = featurize(tokenize(premise), tokenize(hypothesis), self.table)
        except FeaturizationError as exc:
            raise VictimError(str(exc)) from exc
        return linear_classify(self.model, feats)


def ce_loss_and_grad(
    weights: np.ndarray, bias: np.ndarray, x: np.ndarray, y: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy and its analytic gradient for a batch."""
    probs = _softmax(x @ weights.T + bias)
    n = x.shape[0]
    eps = 1e-300  # guards log(0) only; training probs stay well away from it
    loss = float(-np.log(probs[np.arange(n), y] + eps).mean())
    d = probs.copy()
    d[np.arange(n), y] -= 1.0
    d /= n
    return loss, d.T @ x, d.sum(axis=0)


@dataclass(frozen=True, slots=True)
class TrainResult:
    model: LinearModel
    epoch_losses: tuple[float, ...]


def train_linear(
    examples: Sequence[NliExample],
    table: EmbeddingTable,
    epochs: int,
    learning_rate: float,
    seed: int,
    batch_size: int = 32,
) -> TrainResult:
    """Mini-batch gradient descent from a zero initialization.

    Deterministic for a fixed seed (the RNG only shuffles batch order).
    The loss trace holds the full-dataset mean cross-entropy after each
    epoch.  Unfeaturizable examples are skipped with a warning.
    """
    feats, labels = [], []
    for e in examples:
        try:
            feats.append(featurize(tokenize(e.premise), tokenize(e.hypothesis), table))
        except FeaturizationError:
            warnings.warn(f"skipping unfeaturizable example {e.id}", stacklevel=2)
            continue
        labels.append(LABEL_ORDER.index(e.gold_label))
    if not feats:
        raise FeaturizationError("no featurizable training examples")
    x = np.stack(feats)
    y = np.asarray(labels, dtype=np.int64)
    present = set(y.tolist())
    if len(present) < 3:
        missing = [LABEL_ORDER[i].value for i in range(3) if i not in present]
        warnings.warn(f"training data has no examples for: {missing}", stacklevel=2)

    weights = np.zeros((3, x.shape[1]))
    bias = np.zeros(3)
    rng = np.random.default_rng(seed)
    trace: list[float] = []
    for _ in range(epochs):
        order = rng.permutation(len(y))
        for start in range(0, len(y), max(batch_size, 1)):
            batch = order[start : start + max(batch_size, 1)]
            _, gw, gb = ce_loss_and_grad(weights, bias, x[batch], y[batch])
            weights = weights - learning_rate * gw
            bias = bias - learning_rate * gb
        loss, _, _ = ce_loss_and_grad(weights, bias, x, y)
        if not np.isfinite(loss):
            raise DivergenceError(
                f"loss became non-finite at epoch {len(trace) + 1}; "
                "try a smaller learning rate"
            )
        trace.append(loss)
    return TrainResult(model=LinearModel(weights=weights, bias=bias), epoch_losses=tuple(trace))


def save_linear_model(model: LinearModel, path: str | Path) -> None:
    """Text format: "3 F" header, three weight rows, one bias row."""
    lines = [f"3 {model.weights.shape[1]}"]
    for row in model.weights:
        lines.append(" ".join(repr(float(v)) for v in row))
    lines.append(" ".join(repr(float(v)) for v in model.bias))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_linear_model(path: str | Path) -> LinearModel:
    raw = Path(path).read_text(encoding="utf-8").splitlines()
    rows = [line for line in raw if line.strip()]
    if not rows:
        raise ValueError(f"{path}: empty model file")
    header = rows[0].split()
    if len(header) != 2 or header[0] != "3":
        raise ValueError(f"{path}: bad header {rows[0]!r}")
    f = int(header[1])
    if len(rows) != 5:
        raise ValueError(f"{path}: expected 3 weight rows and 1 bias row")
    weights = np.array([[float(v) for v in rows[i].split()] for i in (1, 2, 3)])
    bias = np.array([float(v) for v in rows[4].split()])
    if weights.shape != (3, f):
        raise ValueError(f"{path}: weight shape {weights.shape} does not match header")
    return LinearModel(weights=weights, bias=bias)


# ---------------------------------------------------------------------------
# Rule-based desk victims


def _content_tokens(tokens: Sequence[str], stopwords: frozenset[str]) -> list[str]:
    return [t for t in tokens if t not in stopwords and any(ch.isalnum() for ch in t)]


def _rule_verdict(
    premise: str,
    hypothesis: str,
    table: EmbeddingTable,
    stopwords: frozenset[str],
    word_sim_floor: float,
) -> Label:
    p_tokens = tokenize(premise)
    h_tokens = tokenize(hypothesis)
    p_set = set(p_tokens)
    if any(t in NEGATION_TOKENS and t not in p_set for t in h_tokens):
        return Label.CONTRADICTION
    covered = all(
        h in p_set or any(n in p_set for n in table.nearest(h, 1, word_sim_floor))
        for h in _content_tokens(h_tokens, stopwords)
    )
    return Label.ENTAILMENT if covered else Label.NEUTRAL


def _rule_output(label: Label) -> ClassifierOutput:
    rest = (1.0 - RULE_CONFIDENCE) / 2.0
    probs = [rest, rest, rest]
    probs[LABEL_ORDER.index(label)] = RULE_CONFIDENCE
    return ClassifierOutput.from_probs(probs)


class RulePairClassifier:
    """Deterministic test victim.

    Rules, in order: a negation token in H that is absent from P means
    Contradiction; full coverage of H's content tokens by P's tokens or
    their top-1 embedding neighbors means Entailment; anything else is
    Neutral.  Confidence is the fixed 0.9 heuristic.
    """

    def __init__(
        self,
        table: EmbeddingTable,
        stopwords: frozenset[str],
        word_sim_floor: float = 0.7,
    ):
        self.table = table
        self.stopwords = stopwords
        self.word_sim_floor = word_sim_floor

    def classify(self, premise: str, hypothesis: str) -> ClassifierOutput:
        return _rule_output(
            _rule_verdict(premise, hypothesis, self.table, self.stopwords, self.word_sim_floor)
        )


class TemplateExplainer:
    """Emits explanation text from the same three rules the rule victim uses.

    Coverage produces "<p-word> is a <h-word>" joined over non-identical
    aligned pairs (or "<w> is a <w>" for the first content word when H adds
    nothing new); negation produces "<X> is not <Y>"; anything else produces
    "<X> is not necessarily <Y>".  X/Y is the highest-cosine pair of content
    words not identically present in the other sentence, with deterministic
    fallbacks when a side has no such words.
    """

    def __init__(
        self,
        table: EmbeddingTable,
        stopwords: frozenset[str],
        word_sim_floor: float = 0.7,
    ):
        self.table = table
        self.stopwords = stopwords
        self.word_sim_floor = word_sim_floor

    def explain(self, premise: str, hypothesis: str) -> str:
        verdict = _rule_verdict(
            premise, hypothesis, self.table, self.stopwords, self.word_sim_floor
        )
        p_tokens = tokenize(premise)
        h_tokens = tokenize(hypothesis)
        if verdict is Label.ENTAILMENT:
            return self._coverage_text(p_tokens, h_tokens)
        x, y = self._contrast_pair(p_tokens, h_tokens)
        if verdict is Label.CONTRADICTION:
            return f"{x} is not {y}"
        return f"{x} is not necessarily {y}"

    def _coverage_text(self, p_tokens: list[str], h_tokens: list[str]) -> str:
        p_set = set(p_tokens)
        pairs: list[tuple[str, str]] = []
        for h in _content_tokens(h_tokens, self.stopwords):
            if h in p_set:
                continue
            for neighbor in self.table.nearest(h, 1, self.word_sim_floor):
                if neighbor in p_set:
                    pairs.append((neighbor, h))
                    break
        if pairs:
            return ". ".join(f"{p} is a {h}" for p, h in pairs)
        content = _content_tokens(h_tokens, self.stopwords)
        w = content[0] if content else (h_tokens[0] if h_tokens else "hypothesis")
        return f"{w} is a {w}"

    def _contrast_pair(self, p_tokens: list[str], h_tokens: list[str]) -> tuple[str, str]:
        p_set, h_set = set(p_tokens), set(h_tokens)
        xs = [t for t in _content_tokens(p_tokens, self.stopwords) if t not in h_set]
        ys = [t for t in _content_tokens(h_tokens, self.stopwords) if t not in p_set]
        if not xs:
            xs = _content_tokens(p_tokens, self.stopwords) or list(p_tokens) or ["premise"]
        if not ys:
            ys = _content_tokens(h_tokens, self.stopwords) or list(h_tokens) or ["hypothesis"]
        best: tuple[float, str, str] | None = None
        for x in xs:
            vx = self.table.lookup(x)
            if vx is None:
                continue
            nx = float(np.linalg.norm(vx))
            if nx == 0.0:
                continue
            for y in ys:
                vy = self.table.lookup(y)
                if vy is None:
                    continue
                ny = float(np.linalg.norm(vy))
                if ny == 0.0:
                    continue
                cos = float(vx @ vy) / (nx * ny)
                key = (-cos, x, y)
                if best is None or key < (-best[0], best[1], best[2]):
                    best = (cos, x, y)
        if best is not None:
            return best[1], best[2]
        return xs[0], ys[0]


class KeywordExpl2Label:
    """Surface-form explanation classifier.

    "not necessarily" is checked before the contradiction keywords so the
    neutral template never trips the "not" rule.  Matching is plain
    substring containment on the lowercased text.
    """

    CONTRADICTION_MARKERS: Final = ("not", "cannot", "no ")

    def classify_explanation(self, explanation: str) -> ClassifierOutput:
        text = explanation.lower()
        if "not necessarily" in text:
            return _rule_output(Label.NEUTRAL)
        if any(marker in text for marker in self.CONTRADICTION_MARKERS):
            return _rule_output(Label.CONTRADICTION)
        return _rule_output(Label.ENTAILMENT)


class ConstantExplainer:
    """Returns the same explanation for every input pair."""

    def __init__(self, text: str):
        if not text.strip():
            raise ValueError("constant explanation must be non-empty")
        self.text = text

    def explain(self, premise: str, hypothesis: str) -> str:
        return self.text


# ---------------------------------------------------------------------------
# Pipeline composition


class ExplainThenPredict:
    """Two-stage victim: explain(P, H), then classify the explanation alone.

    The label is a function of the explanation text only, which is the whole
    point: perturbing P or H can change the label solely by changing the
    explanation.
    """

    def __init__(self, explainer: Explainer, expl_clf: ExplanationClassifier):
        self.explainer = explainer
        self.expl_clf = expl_clf

    def explain_and_classify(self, premise: str, hypothesis: str) -> tuple[str, ClassifierOutput]:
        explanation = self.explainer.explain(premise, hypothesis)
        if not explanation:
            raise VictimError("explainer returned empty text")
        return explanation, self.expl_clf.classify_explanation(explanation)

    def classify(self, premise: str, hypothesis: str) -> ClassifierOutput:
        return self.explain_and_classify(premise, hypothesis)[1]


def explain_then_predict(
    explainer: Explainer,
    expl_clf: ExplanationClassifier,
    premise: str,
    hypothesis: str,
) -> tuple[str, ClassifierOutput]:
    """One-shot composition; the label is exactly expl_clf on the returned text."""
    return ExplainThenPredict(explainer, expl_clf).explain_and_classify(premise, hypothesis)


# ---------------------------------------------------------------------------
# Query counting


class QueryCounter:
    """Thread-safe invocation counter."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._count = 0

    @property
    def count(self) -> int:
        with self._lock:
            return self._count

    def increment(self) -> None:
        with self._lock:
            self._count += 1

    def reset(self) -> None:
        with self._lock:
            self._count = 0


class _CountedVictim:
    def __init__(self, inner: PairClassifier, counter: QueryCounter):
        self._inner = inner
        self._counter = counter

    def classify(self, premise: str, hypothesis: str) -> ClassifierOutput:
        self._counter.increment()
        return self._inner.classify(premise, hypothesis)


class _CountedPipeline(_CountedVictim):
    def explain_and_classify(self, premise: str, hypothesis: str) -> tuple[str, ClassifierOutput]:
        self._counter.increment()
        return self._inner.explain_and_classify(premise, hypothesis)  # type: ignore[attr-defined]

    def classify(self, premise: str, hypothesis: str) -> ClassifierOutput:
        return self.explain_and_classify(premise, hypothesis)[1]


def with_query_counter(victim: PairClassifier) -> tuple[PairClassifier, QueryCounter]:
    """Wrap a victim so every classify (or pipeline) call bumps the counter."""
    counter = QueryCounter()
    cls = _CountedPipeline if hasattr(victim, "explain_and_classify") else _CountedVictim
    return cls(victim, counter), counter


class SerializedVictim:
    """Lock-guarded proxy for victims that declare themselves serial."""

    def __init__(self, inner: PairClassifier):
        self._inner = inner
        self._lock = threading.Lock()

    def classify(self, premise: str, hypothesis: str) -> ClassifierOutput:
        with self._lock:
            return self._inner.classify(premise, hypothesis)


# ---------------------------------------------------------------------------
# Remote wire-protocol clients

DEFAULT_TIMEOUT: Final = 30.0  # seconds; no retries, retries would distort query counts


class _RemoteBase:
    def __init__(self, base_url: str, timeout: float = DEFAULT_TIMEOUT):
        self._base = base_url.rstrip("/")
        self._timeout = timeout

    def _post(self, path: str, payload: dict) -> dict:
        try:
            resp = requests.post(self._base + path, json=payload, timeout=self._timeout)
        except requests.RequestException as exc:
            raise VictimError(f"POST {path} failed: {exc}") from exc
        if resp.status_code != 200:
            raise VictimError(f"POST {path} returned {resp.status_code}: {resp.text[:200]}")
        try:
            data = resp.json()
        except ValueError as exc:
            raise VictimError(f"POST {path} returned non-JSON body") from exc
        if not isinstance(data, dict):
            raise VictimError(f"POST {path} returned non-object JSON")
        return data


def _parse_wire_output(data: dict, context: str) -> ClassifierOutput:
    probs_obj = data.get("probs")
    if not isinstance(probs_obj, dict):
        raise VictimError(f"{context}: missing probs object")
    try:
        probs = [float(probs_obj[lab.value]) for lab in LABEL_ORDER]
    except (KeyError, TypeError, ValueError) as exc:
        raise VictimError(f"{context}: probs must carry all three labels") from exc
    if any(p < 0.0 or p > 1.0 for p in probs):
        raise VictimError(f"{context}: probability out of [0,1]")
    total = sum(probs)
    if abs(total - 1.0) > WIRE_PROB_SUM_TOL:
        raise VictimError(f"{context}: probs sum to {total!r}, outside 1e-6 tolerance")
    # Within tolerance: renormalize so the strict in-process invariant holds.
    output = ClassifierOutput.from_probs([p / total for p in probs])
    raw_label = data.get("label")
    if not isinstance(raw_label, str):
        raise VictimError(f"{context}: missing label")
    try:
        claimed = Label.parse(raw_label)
    except ValueError as exc:
        raise VictimError(f"{context}: {exc}") from exc
    if claimed is not output.label:
        raise VictimError(
            f"{context}: label {claimed.value!r} disagrees with argmax {output.label.value!r}"
        )
    return output


class RemotePairClassifier(_RemoteBase):
    def classify(self, premise: str, hypothesis: str) -> ClassifierOutput:
        data = self._post("/classify", {"premise": premise, "hypothesis": hypothesis})
        return _parse_wire_output(data, "/classify")


class RemoteExplanationClassifier(_RemoteBase):
    def classify_explanation(self, explanation: str) -> ClassifierOutput:
        data = self._post("/classify_expl", {"explanation": explanation})
        return _parse_wire_output(data, "/classify_expl")


class RemoteExplainer(_RemoteBase):
    def explain(self, premise: str, hypothesis: str) -> str:
        data = self._post("/explain", {"premise": premise, "hypothesis": hypothesis})
        explanation = data.get("explanation")
        if not isinstance(explanation, str) or not explanation:
            raise VictimError("/explain: missing or empty explanation")
        return explanation


class RemoteEncoder(_RemoteBase):
    def encode(self, texts: Sequence[str]) -> list[np.ndarray | None]:
        data = self._post("/embed", {"texts": list(texts)})
        vectors = data.get("vectors")
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise VictimError("/embed: vectors missing or wrong length")
        out: list[np.ndarray | None] = []
        for vec in vectors:
            if not isinstance(vec, list) or not vec:
                raise VictimError("/embed: malformed vector")
            out.append(np.asarray(vec, dtype=np.float64))
        return out


class RemoteMlmProvider(_RemoteBase):
    def candidates(self, tokens: Sequence[str], mask_index: int, k: int) -> list[str]:
        data = self._post(
            "/mlm_candidates",
            {"tokens": list(tokens), "mask_index": int(mask_index), "k": int(k)},
        )
        cands = data.get("candidates")
        if not isinstance(cands, list) or not all(isinstance(c, str) for c in cands):
            raise VictimError("/mlm_candidates: malformed candidates")
        return cands
