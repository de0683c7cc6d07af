"""Black-box word-substitution attack engine.

Importance ranking, candidate generation, the linguistic and semantic
constraints, and the greedy search itself.  Two recipes are wired in: the
embedding-neighbor recipe (deletion probing, POS filter, N candidates) and
the masked-LM recipe (mask probing, provider candidates, K candidates, no
POS filter).

The attack operates on the tokenizer-normalized form of the targeted field:
`original_text` in the emitted record is the space-joined token sequence,
which is what every victim query sees and what `perturbed_text` reconstructs
from byte-exactly.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import EmbeddingTable, Label, NliExample, PosLexicon, tokenize
from .errors import ConfigError, SimilarityError, VictimError
from .victim import (
    CandidateProvider,
    ClassifierOutput,
    PairClassifier,
    SentenceEncoder,
    with_query_counter,
)

MASK_TOKEN = "[MASK]"


class Recipe(enum.Enum):
    TEXTFOOLER_STYLE = "textfooler"
    BERT_ATTACK_STYLE = "bertattack"


class TargetField(enum.Enum):
    PREMISE = "premise"
    HYPOTHESIS = "hypothesis"


class ProbeMode(enum.Enum):
    DELETION = "deletion"
    MASKING = "masking"


class AttackStatus(enum.Enum):
    SUCCESS = "success"
    FAILED = "failed"
    SKIPPED = "skipped"
    ERRORED = "errored"


@dataclass(frozen=True, slots=True)
class AttackConfig:
    recipe: Recipe
    target_field: TargetField
    max_candidates: int = 50
    sentence_sim_threshold: float = 0.7
    mlm_top_k: int = 6
    word_sim_floor: float = 0.7
    max_perturb_fraction: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_candidates < 1:
            raise ConfigError(f"max_candidates must be >= 1, got {self.max_candidates}")
        if self.mlm_top_k < 1:
            raise ConfigError(f"mlm_top_k must be >= 1, got {self.mlm_top_k}")
        if not 0.0 <= self.sentence_sim_threshold <= 1.0:
            raise ConfigError(
                "sentence_sim_threshold must be in [0, 1], "
                f"got {self.sentence_sim_threshold}"
            )
        if not -1.0 <= self.word_sim_floor <= 1.0:
            raise ConfigError(
                f"word_sim_floor must be in [-1, 1], got {self.word_sim_floor}"
            )
        if not 0.0 < self.max_perturb_fraction <= 1.0:
            raise ConfigError(
                "max_perturb_fraction must be in (0, 1], "
                f"got {self.max_perturb_fraction}"
            )

    def echo(self) -> dict:
        return {
            "recipe": self.recipe.value,
            "target_field": self.target_field.value,
            "max_candidates": self.max_candidates,
            "sentence_sim_threshold": self.sentence_sim_threshold,
            "mlm_top_k": self.mlm_top_k,
            "word_sim_floor": self.word_sim_floor,
            "max_perturb_fraction": self.max_perturb_fraction,
            "seed": self.seed,
        }


@dataclass(frozen=True, slots=True)
class Substitution:
    position: int
    original: str
    replacement: str

    def __post_init__(self) -> None:
        if self.position < 0:
            raise ValueError(f"position must be non-negative, got {self.position}")
        if self.original == self.replacement:
            raise ValueError(f"substitution replaces {self.original!r} with itself")


@dataclass(frozen=True, slots=True)
class AttackRecord:
    example_id: str
    status: AttackStatus
    original_text: str
    perturbed_text: str
    substitutions: tuple[Substitution, ...]
    queries: int
    sentence_similarity: float
    orig_output: ClassifierOutput | None
    final_output: ClassifierOutput | None
    orig_explanation: str | None = None
    final_explanation: str | None = None

    def to_json_dict(self) -> dict:
        return {
            "example_id": self.example_id,
            "status": self.status.value,
            "original_text": self.original_text,
            "perturbed_text": self.perturbed_text,
            "substitutions": [
                {"position": s.position, "original": s.original, "replacement": s.replacement}
                for s in self.substitutions
            ],
            "queries": self.queries,
            "sentence_similarity": self.sentence_similarity,
            "orig_output": self.orig_output.to_wire() if self.orig_output else None,
            "final_output": self.final_output.to_wire() if self.final_output else None,
            "orig_explanation": self.orig_explanation,
            "final_explanation": self.final_explanation,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "AttackRecord":
        def output(obj: dict | None) -> ClassifierOutput | None:
            if obj is None:
                return None
            probs = obj["probs"]
            return ClassifierOutput.from_probs(
                [probs["entailment"], probs["neutral"], probs["contradiction"]]
            )

        return cls(
            example_id=data["example_id"],
            status=AttackStatus(data["status"]),
            original_text=data["original_text"],
            perturbed_text=data["perturbed_text"],
            substitutions=tuple(
                Substitution(s["position"], s["original"], s["replacement"])
                for s in data["substitutions"]
            ),
            queries=data["queries"],
            sentence_similarity=data["sentence_similarity"],
            orig_output=output(data["orig_output"]),
            final_output=output(data["final_output"]),
            orig_explanation=data.get("orig_explanation"),
            final_explanation=data.get("final_explanation"),
        )


@dataclass(frozen=True, slots=True)
class AttackResources:
    """Read-only bundle shared by all workers."""

    embeddings: EmbeddingTable
    stopwords: frozenset[str]
    pos_lexicon: PosLexicon = field(default_factory=PosLexicon)
    encoder: SentenceEncoder | None = None
    mlm_provider: CandidateProvider | None = None


@dataclass(frozen=True, slots=True)
class CandidateLogEntry:
    """One decision point: the surviving candidates for a position, given the
    token state the search was in when it got there."""

    position: int
    state: tuple[str, ...]
    survivors: tuple[str, ...]


# ---------------------------------------------------------------------------
# Building blocks


def _is_eligible(token: str, stopwords: frozenset[str]) -> bool:
    return token not in stopwords and any(ch.isalnum() for ch in token)


def rank_word_importance(
    tokens: Sequence[str],
    victim: PairClassifier,
    other_field: str,
    gold_label: Label,
    stopwords: frozenset[str],
    mode: ProbeMode,
    *,
    target_field: TargetField = TargetField.HYPOTHESIS,
    orig_output: ClassifierOutput | None = None,
) -> list[tuple[int, float]]:
    """Rank positions by the probability drop their deletion/masking causes.

    importance(i) = P_gold(original) - P_gold(probe_i); when the probe's
    predicted label moves away from gold, the probe's gain on that new top
    label over the original distribution is added.  Stopword and pure
    punctuation positions are skipped.  Consumes one victim query per
    eligible position, plus one for the original unless `orig_output` is
    supplied by the caller.
    """
    if not tokens:
        raise ValueError("tokens must be non-empty")

    def ask(target_tokens: Sequence[str]) -> ClassifierOutput:
        text = " ".join(target_tokens)
        if target_field is TargetField.PREMISE:
            return victim.classify(text, other_field)
        return victim.classify(other_field, text)

    if orig_output is None:
        orig_output = ask(tokens)
    p_orig = orig_output.p(gold_label)

    scores: list[tuple[int, float]] = []
    for i, token in enumerate(tokens):
        if not _is_eligible(token, stopwords):
            continue
        if mode is ProbeMode.DELETION:
            probe = [t for j, t in enumerate(tokens) if j != i]
        else:
            probe = list(tokens)
            probe[i] = MASK_TOKEN
        probe_out = ask(probe)
        score = p_orig - probe_out.p(gold_label)
        if probe_out.label is not gold_label:
            score += probe_out.p(probe_out.label) - orig_output.p(probe_out.label)
        scores.append((i, score))
    scores.sort(key=lambda item: (-item[1], item[0]))
    return scores


def embedding_candidates(
    word: str, table: EmbeddingTable, n: int, word_sim_floor: float
) -> list[str]:
    """Top-n cosine neighbors above the floor, excluding the word itself."""
    return table.nearest(word, n, word_sim_floor)


def mlm_candidates(
    tokens: Sequence[str], position: int, k: int, provider: CandidateProvider
) -> list[str]:
    """Ask the provider for replacements at `position`, then clean the list.

    The original word, pure punctuation, and sub-word fragments (anything
    containing "##") are dropped; duplicates collapse to their first
    occurrence; at most k survive.
    """
    raw = provider.candidates(tokens, position, k)
    original = tokens[position]
    seen: set[str] = set()
    out: list[str] = []
    for cand in raw:
        if cand == original or cand in seen:
            continue
        if "##" in cand or not any(ch.isalnum() for ch in cand):
            continue
        seen.add(cand)
        out.append(cand)
        if len(out) == k:
            break
    return out


def pos_consistent(original: str, candidate: str, lexicon: PosLexicon) -> bool:
    """True iff the tag sets intersect; unknown words pass (permissive)."""
    a = lexicon.tags(original)
    b = lexicon.tags(candidate)
    if a is None or b is None:
        return True
    return bool(a & b)


class MeanEmbeddingEncoder:
    """Default sentence encoder: mean of in-vocabulary word vectors."""

    def __init__(self, table: EmbeddingTable):
        self.table = table

    def encode(self, texts: Sequence[str]) -> list[np.ndarray | None]:
        out: list[np.ndarray | None] = []
        for text in texts:
            vecs = [v for t in tokenize(text) if (v := self.table.lookup(t)) is not None]
            out.append(np.mean(vecs, axis=0) if vecs else None)
        return out


class EmbeddingNeighborProvider:
    """Fallback MLM provider: context-free embedding neighbors of the masked word."""

    def __init__(self, table: EmbeddingTable, word_sim_floor: float = 0.7):
        self.table = table
        self.word_sim_floor = word_sim_floor

    def candidates(self, tokens: Sequence[str], mask_index: int, k: int) -> list[str]:
        return embedding_candidates(tokens[mask_index], self.table, k, self.word_sim_floor)


class ScriptedProvider:
    """Deterministic stub provider: a fixed candidate list per masked word."""

    def __init__(self, script: dict[str, Sequence[str]]):
        self.script = {w: list(c) for w, c in script.items()}

    def candidates(self, tokens: Sequence[str], mask_index: int, k: int) -> list[str]:
        return list(self.script.get(tokens[mask_index], []))


def sentence_similarity(text_a: str, text_b: str, encoder: SentenceEncoder) -> float:
    """Cosine of the two sentence vectors; raises SimilarityError when a side
    has no representable content (the attack treats that as rejection)."""
    vec_a, vec_b = encoder.encode([text_a, text_b])
    if vec_a is None or vec_b is None:
        raise SimilarityError("sentence has no in-vocabulary tokens")
    norm_a = float(np.linalg.norm(vec_a))
    norm_b = float(np.linalg.norm(vec_b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise SimilarityError("sentence vector has zero norm")
    return float(vec_a @ vec_b) / (norm_a * norm_b)


# ---------------------------------------------------------------------------
# Greedy search


def greedy_attack(
    example: NliExample,
    victim: PairClassifier,
    config: AttackConfig,
    resources: AttackResources,
    *,
    candidate_log: list[CandidateLogEntry] | None = None,
) -> AttackRecord:
    """Run the greedy substitution search against one example.

    Per ranked position: generate candidates per recipe, filter (POS for the
    embedding recipe, then sentence similarity against the original full
    sentence), query the victim on each survivor.  Any survivor whose label
    moves away from gold ends the attack; the one with the highest sentence
    similarity is committed (ties alphabetical).  Otherwise the candidate
    minimizing P_gold is committed only if it lowers the current P_gold
    strictly.  The search stops on a flip, on position exhaustion, or when
    max_perturb_fraction is reached.

    Victim failures mid-run yield a partial Errored record.  The victim is
    wrapped in a fresh QueryCounter here, so `queries` is exact and isolated
    per example even when campaigns run attacks concurrently.
    """
    wrapped, counter = with_query_counter(victim)
    pipeline = hasattr(wrapped, "explain_and_classify")

    if config.target_field is TargetField.PREMISE:
        target_raw, other_text = example.premise, example.hypothesis
    else:
        target_raw, other_text = example.hypothesis, example.premise
    tokens = tokenize(target_raw)
    original_text = " ".join(tokens)
    gold = example.gold_label

    def ask(target_tokens: Sequence[str]) -> tuple[ClassifierOutput, str | None]:
        text = " ".join(target_tokens)
        pair = (
            (text, other_text)
            if config.target_field is TargetField.PREMISE
            else (other_text, text)
        )
        if pipeline:
            explanation, out = wrapped.explain_and_classify(*pair)
            return out, explanation
        return wrapped.classify(*pair), None

    encoder = resources.encoder or MeanEmbeddingEncoder(resources.embeddings)
    provider = resources.mlm_provider or EmbeddingNeighborProvider(
        resources.embeddings, config.word_sim_floor
    )

    cur = list(tokens)
    subs: list[Substitution] = []
    orig_out: ClassifierOutput | None = None
    orig_expl: str | None = None
    cur_out: ClassifierOutput | None = None
    cur_expl: str | None = None
    final_sim = 1.0

    def record(status: AttackStatus) -> AttackRecord:
        return AttackRecord(
            example_id=example.id,
            status=status,
            original_text=original_text,
            perturbed_text=" ".join(cur),
            substitutions=tuple(subs),
            queries=counter.count,
            sentence_similarity=final_sim,
            orig_output=orig_out,
            final_output=cur_out,
            orig_explanation=orig_expl,
            final_explanation=cur_expl,
        )

    try:
        orig_out, orig_expl = ask(tokens)
        cur_out, cur_expl = orig_out, orig_expl
        if orig_out.label is not gold:
            return record(AttackStatus.SKIPPED)

        mode = (
            ProbeMode.DELETION
            if config.recipe is Recipe.TEXTFOOLER_STYLE
            else ProbeMode.MASKING
        )
        ranking = rank_word_importance(
            tokens,
            wrapped,
            other_text,
            gold,
            resources.stopwords,
            mode,
            target_field=config.target_field,
            orig_output=orig_out,
        )

        max_subs = math.floor(config.max_perturb_fraction * len(tokens))
        for position, _score in ranking:
            if len(subs) >= max_subs:
                break
            word = cur[position]
            if config.recipe is Recipe.TEXTFOOLER_STYLE:
                cands = embedding_candidates(
                    word, resources.embeddings, config.max_candidates, config.word_sim_floor
                )
            else:
                cands = mlm_candidates(cur, position, config.mlm_top_k, provider)

            survivors: list[tuple[str, list[str], float]] = []
            for cand in cands:
                if cand == word:
                    continue
                if config.recipe is Recipe.TEXTFOOLER_STYLE and not pos_consistent(
                    word, cand, resources.pos_lexicon
                ):
                    continue
                trial = cur[:position] + [cand] + cur[position + 1 :]
                try:
                    sim = sentence_similarity(original_text, " ".join(trial), encoder)
                except SimilarityError:
                    continue
                if sim < config.sentence_sim_threshold:
                    continue
                survivors.append((cand, trial, sim))

            if candidate_log is not None:
                candidate_log.append(
                    CandidateLogEntry(
                        position=position,
                        state=tuple(cur),
                        survivors=tuple(s[0] for s in survivors),
                    )
                )

            evals = []
            for cand, trial, sim in survivors:
                out, expl = ask(trial)
                evals.append((cand, trial, sim, out, expl))

            flippers = [e for e in evals if e[3].label is not gold]
            if flippers:
                cand, trial, sim, out, expl = min(flippers, key=lambda e: (-e[2], e[0]))
                subs.append(Substitution(position, word, cand))
                cur, cur_out, cur_expl, final_sim = trial, out, expl, sim
                return record(AttackStatus.SUCCESS)

            if evals:
                cand, trial, sim, out, expl = min(
                    evals, key=lambda e: (e[3].p(gold), -e[2], e[0])
                )
                if out.p(gold) < cur_out.p(gold):
                    subs.append(Substitution(position, word, cand))
                    cur, cur_out, cur_expl, final_sim = trial, out, expl, sim

        return record(AttackStatus.FAILED)
    except VictimError:
        return record(AttackStatus.ERRORED)


def attack_explain_then_predict(
    example: NliExample,
    pipeline: PairClassifier,
    config: AttackConfig,
    resources: AttackResources,
    *,
    candidate_log: list[CandidateLogEntry] | None = None,
) -> AttackRecord:
    """Greedy attack against an explain-then-predict pipeline.

    Identical to greedy_attack, with explanations captured, plus the
    mediation check: a record whose explanation did not change cannot have
    changed its label.
    """
    if not hasattr(pipeline, "explain_and_classify"):
        raise TypeError("pipeline victim must expose explain_and_classify")
    rec = greedy_attack(
        example, pipeline, config, resources, candidate_log=candidate_log
    )
    if (
        rec.orig_explanation is not None
        and rec.orig_explanation == rec.final_explanation
        and rec.orig_output is not None
        and rec.final_output is not None
        and rec.orig_output.label is not rec.final_output.label
    ):
        raise AssertionError(
            f"example {example.id}: label changed while explanation did not"
        )
    return rec
