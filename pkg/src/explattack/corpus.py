"""Dataset, embedding, and lexicon ingestion.

Everything loaded here is immutable after construction and safe to share
across worker threads.  The tokenizer defined at the bottom is the single
shared routine used by attacks, victims, and metrics alike, so token
boundaries can never disagree between them.
"""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Final, Iterable, Mapping, Sequence

import numpy as np

from .errors import CorpusError


class Label(enum.Enum):
    """Three-way NLI verdict."""

    ENTAILMENT = "entailment"
    NEUTRAL = "neutral"
    CONTRADICTION = "contradiction"

    @classmethod
    def parse(cls, raw: str) -> "Label":
        """Case-insensitive parse of full names and single-letter initials."""
        text = raw.strip().lower()
        for member in cls:
            if text == member.value or text == member.value[0]:
                return member
        raise ValueError(f"unknown label {raw!r}")


# Fixed order used for probability vectors and argmax tie-breaking.
LABEL_ORDER: Final[tuple[Label, Label, Label]] = (
    Label.ENTAILMENT,
    Label.NEUTRAL,
    Label.CONTRADICTION,
)


@dataclass(frozen=True, slots=True)
class NliExample:
    """One premise/hypothesis pair with gold label and 1-3 reference explanations."""

    id: str
    premise: str
    hypothesis: str
    gold_label: Label
    reference_explanations: tuple[str, ...]

    def __post_init__(self) -> None:
        if not tokenize(self.premise):
            raise ValueError(f"example {self.id}: premise empty after tokenization")
        if not tokenize(self.hypothesis):
            raise ValueError(f"example {self.id}: hypothesis empty after tokenization")
        if not 1 <= len(self.reference_explanations) <= 3:
            raise ValueError(
                f"example {self.id}: need 1-3 reference explanations, "
                f"got {len(self.reference_explanations)}"
            )


class EmbeddingTable:
    """Word -> vector map with a fixed dimension and cached neighbor search.

    Lookup of an absent word returns None (never a zero vector), so callers
    can always distinguish OOV from genuinely zero-valued entries.
    """

    def __init__(self, entries: Mapping[str, Sequence[float]]):
        if not entries:
            raise CorpusError("embedding table must have at least one entry")
        dims = {len(v) for v in entries.values()}
        if len(dims) != 1:
            raise CorpusError(f"inconsistent vector lengths: {sorted(dims)}")
        self.dim: int = dims.pop()
        if self.dim < 1:
            raise CorpusError("embedding vectors must have at least one component")
        self._entries: dict[str, np.ndarray] = {}
        for word, vec in entries.items():
            arr = np.asarray(vec, dtype=np.float64)
            arr.flags.writeable = False
            self._entries[word] = arr
        # Lazily built dense view for nearest-neighbor queries.
        self._words: list[str] | None = None
        self._unit_matrix: np.ndarray | None = None

    def __contains__(self, word: str) -> bool:
        return word in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def lookup(self, word: str) -> np.ndarray | None:
        return self._entries.get(word)

    def words(self) -> Iterable[str]:
        return self._entries.keys()

    def _dense(self) -> tuple[list[str], np.ndarray]:
        if self._words is None:
            self._words = sorted(self._entries)
            matrix = np.stack([self._entries[w] for w in self._words])
            norms = np.linalg.norm(matrix, axis=1, keepdims=True)
            norms[norms == 0.0] = 1.0
            self._unit_matrix = matrix / norms
        assert self._unit_matrix is not None
        return self._words, self._unit_matrix

    def nearest(self, word: str, n: int, floor: float) -> list[str]:
        """Top-n vocabulary words by cosine similarity to `word`.

        Excludes the word itself, keeps only cosine >= floor, orders by
        descending cosine with alphabetical tie-break.  OOV word -> [].
        """
        vec = self._entries.get(word)
        if vec is None or n < 1:
            return []
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            return []
        words, unit = self._dense()
        sims = unit @ (vec / norm)
        ranked = sorted(
            (
                (-float(sims[i]), words[i])
                for i in range(len(words))
                if words[i] != word and float(sims[i]) >= floor
            ),
        )
        return [w for _, w in ranked[:n]]


POS_TAGS: Final[frozenset[str]] = frozenset({"NOUN", "VERB", "ADJ", "ADV", "OTHER"})


@dataclass(frozen=True, slots=True)
class PosLexicon:
    """Word -> set of coarse POS tags; ambiguous words carry several tags."""

    entries: Mapping[str, frozenset[str]] = field(default_factory=dict)

    def tags(self, word: str) -> frozenset[str] | None:
        return self.entries.get(word)


@dataclass(frozen=True, slots=True)
class ColumnMap:
    """Names of the dataset CSV columns; override to match other layouts."""

    premise: str = "premise"
    hypothesis: str = "hypothesis"
    label: str = "label"
    explanations: tuple[str, ...] = ("explanation_1", "explanation_2", "explanation_3")
    id: str = "id"


def load_esnli(path: str | Path, columns: ColumnMap = ColumnMap()) -> list[NliExample]:
    """Load a comma-separated, double-quote-escaped NLI dataset.

    Ids come from the id column when present, else the zero-based data-row
    index as a string.  Explanation cells that are empty are dropped; each
    row must keep at least one.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CorpusError(f"{path}: empty file") from None
        index = {name: i for i, name in enumerate(header)}
        for required in (columns.premise, columns.hypothesis, columns.label):
            if required not in index:
                raise CorpusError(f"{path}: missing required column {required!r}")
        expl_cols = [c for c in columns.explanations if c in index]
        if not expl_cols:
            raise CorpusError(
                f"{path}: no explanation column found (looked for {columns.explanations})"
            )
        has_id = columns.id in index

        examples: list[NliExample] = []
        for row_num, row in enumerate(reader):
            if len(row) != len(header):
                raise CorpusError(
                    f"{path}: row {row_num}: expected {len(header)} fields, got {len(row)}"
                )
            raw_label = row[index[columns.label]]
            try:
                label = Label.parse(raw_label)
            except ValueError:
                raise CorpusError(
                    f"{path}: row {row_num}: unknown label {raw_label!r}"
                ) from None
            refs = tuple(
                row[index[c]] for c in expl_cols if row[index[c]].strip()
            )
            example_id = row[index[columns.id]] if has_id else str(row_num)
            try:
                examples.append(
                    NliExample(
                        id=example_id,
                        premise=row[index[columns.premise]],
                        hypothesis=row[index[columns.hypothesis]],
                        gold_label=label,
                        reference_explanations=refs,
                    )
                )
            except ValueError as exc:
                raise CorpusError(f"{path}: row {row_num}: {exc}") from None
    return examples


def save_esnli(
    examples: Sequence[NliExample],
    path: str | Path,
    columns: ColumnMap = ColumnMap(),
) -> None:
    """Write examples back out in the same column layout load_esnli reads."""
    path = Path(path)
    n_expl = max((len(e.reference_explanations) for e in examples), default=1)
    expl_cols = list(columns.explanations[:n_expl])
    header = [columns.id, columns.premise, columns.hypothesis, columns.label, *expl_cols]
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for e in examples:
            refs = list(e.reference_explanations) + [""] * (n_expl - len(e.reference_explanations))
            writer.writerow([e.id, e.premise, e.hypothesis, e.gold_label.value, *refs])


def load_embeddings(path: str | Path) -> EmbeddingTable:
    """Parse the text format "word v1 ... vd", dimension fixed by line 1."""
    path = Path(path)
    entries: dict[str, list[float]] = {}
    dim: int | None = None
    with path.open(encoding="utf-8") as fh:
        for line_num, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            word, *values = parts
            if not values:
                raise CorpusError(f"{path}: line {line_num}: no vector components")
            if word in entries:
                raise CorpusError(f"{path}: line {line_num}: duplicate word {word!r}")
            try:
                vec = [float(v) for v in values]
            except ValueError:
                raise CorpusError(
                    f"{path}: line {line_num}: non-numeric vector component"
                ) from None
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise CorpusError(
                    f"{path}: line {line_num}: expected {dim} components, got {len(vec)}"
                )
            entries[word] = vec
    if not entries:
        raise CorpusError(f"{path}: empty embedding file")
    return EmbeddingTable(entries)


def load_word_list(path: str | Path) -> frozenset[str]:
    """One word per line, lowercased, deduplicated; blank lines skipped."""
    words = set()
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            word = line.strip().lower()
            if word:
                words.add(word)
    return frozenset(words)


def load_pos_lexicon(path: str | Path) -> PosLexicon:
    """Parse "word TAB tag[,tag...]" lines; tags limited to the coarse set."""
    path = Path(path)
    entries: dict[str, frozenset[str]] = {}
    with path.open(encoding="utf-8") as fh:
        for line_num, line in enumerate(fh, start=1):
            stripped = line.rstrip("\n")
            if not stripped.strip():
                continue
            if "\t" not in stripped:
                raise CorpusError(f"{path}: line {line_num}: expected word TAB tags")
            word, _, tag_field = stripped.partition("\t")
            tags = {t.strip().upper() for t in tag_field.split(",") if t.strip()}
            if not tags:
                raise CorpusError(f"{path}: line {line_num}: empty tag list")
            unknown = tags - POS_TAGS
            if unknown:
                raise CorpusError(
                    f"{path}: line {line_num}: unknown tag(s) {sorted(unknown)}"
                )
            key = word.strip().lower()
            # Repeated words merge their tag sets (ambiguity accumulates).
            entries[key] = frozenset(entries.get(key, frozenset()) | tags)
    return PosLexicon(entries=entries)


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, peel boundary punctuation.

    Any non-alphanumeric character at the start or end of a whitespace chunk
    becomes its own token; interior characters (apostrophes, hyphens, dots)
    stay inside the token, which keeps contractions such as "don't" whole.
    Idempotent on its own output joined by single spaces.
    """
    tokens: list[str] = []
    for chunk in text.lower().split():
        i, j = 0, len(chunk)
        lead: list[str] = []
        while i < j and not chunk[i].isalnum():
            lead.append(chunk[i])
            i += 1
        trail: list[str] = []
        while j > i and not chunk[j - 1].isalnum():
            trail.append(chunk[j - 1])
            j -= 1
        tokens.extend(lead)
        if i < j:
            tokens.append(chunk[i:j])
        tokens.extend(reversed(trail))
    return tokens
