"""Multi-reference explanation-quality metrics.

Sentence-level BLEU (clip-union over references, add-one smoothing),
ROUGE-L, two-stage METEOR (exact then stem), and embedding-based greedy
token matching in the BERTScore style.  All four take raw text and share
the package tokenizer, so attack and metric tokenization can never drift
apart.

Multi-reference handling: max over references for ROUGE-L, METEOR, and the
matching score; BLEU clips each n-gram against the best single reference
count (union clipping).  Corpus scores are arithmetic means of sentence
scores for every metric, BLEU included.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Sequence

from .corpus import tokenize

TokenEmbedder = Callable[[str], "Sequence[float] | None"]

# Expanding more than this many alignment states per reference is pointless:
# chunk minimization has long since converged for natural sentences.
_ALIGN_BUDGET = 200_000


@dataclass(frozen=True, slots=True)
class MetricScore:
    metric: str
    per_sample: tuple[float, ...]
    corpus: float

    def __post_init__(self) -> None:
        for v in self.per_sample + (self.corpus,):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{self.metric} score {v} outside [0, 1]")

    @classmethod
    def from_samples(cls, metric: str, values: Sequence[float]) -> "MetricScore":
        values = tuple(float(v) for v in values)
        corpus = sum(values) / len(values) if values else 0.0
        return cls(metric=metric, per_sample=values, corpus=corpus)


# ---------------------------------------------------------------------------
# BLEU


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate: str, references: Sequence[str], max_n: int = 4) -> float:
    """Sentence BLEU with per-n-gram clipping against the best reference.

    Brevity penalty uses the reference length closest to the candidate's
    (ties resolved toward the shorter reference) and applies when the
    candidate is not longer.  For n >= 2, a raw numerator of zero gets
    add-one smoothing on numerator and denominator; a zero unigram
    numerator short-circuits the whole score to 0.
    """
    if not references:
        raise ValueError("bleu needs at least one reference")
    cand = tokenize(candidate)
    if not cand:
        return 0.0
    refs = [tokenize(r) for r in references]

    log_sum = 0.0
    for n in range(1, max_n + 1):
        cand_counts = _ngram_counts(cand, n)
        ref_counts = [_ngram_counts(r, n) for r in refs]
        clipped = sum(
            min(c, max(rc.get(gram, 0) for rc in ref_counts))
            for gram, c in cand_counts.items()
        )
        total = max(len(cand) - n + 1, 0)
        if n == 1:
            if clipped == 0:
                return 0.0
            p = clipped / total
        elif clipped == 0:
            p = (clipped + 1) / (total + 1)
        else:
            p = clipped / total
        log_sum += math.log(p)

    c = len(cand)
    r = min((abs(len(ref) - c), len(ref)) for ref in refs)[1]
    bp = 1.0 if c > r else math.exp(1.0 - r / c)
    return bp * math.exp(log_sum / max_n)


# ---------------------------------------------------------------------------
# ROUGE-L


def _lcs_len(a: Sequence[str], b: Sequence[str]) -> int:
    prev = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        row = [0] * (len(b) + 1)
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                row[j] = prev[j - 1] + 1
            else:
                row[j] = max(prev[j], row[j - 1])
        prev = row
    return prev[len(b)]


def rouge_l(candidate: str, references: Sequence[str]) -> float:
    """LCS-based F1, maximized over references."""
    if not references:
        raise ValueError("rouge_l needs at least one reference")
    cand = tokenize(candidate)
    if not cand:
        return 0.0
    best = 0.0
    for reference in references:
        ref = tokenize(reference)
        if not ref:
            continue
        lcs = _lcs_len(cand, ref)
        if lcs == 0:
            continue
        p = lcs / len(cand)
        r = lcs / len(ref)
        best = max(best, 2 * p * r / (p + r))
    return best


# ---------------------------------------------------------------------------
# Porter stemmer (METEOR stage 2)


_VOWELS = "aeiou"


def _is_cons(word: str, i: int) -> bool:
    ch = word[i]
    if ch in _VOWELS:
        return False
    if ch == "y":
        return i == 0 or not _is_cons(word, i - 1)
    return True


def _measure(stem: str) -> int:
    m = 0
    prev_vowel = False
    for i in range(len(stem)):
        if _is_cons(stem, i):
            if prev_vowel:
                m += 1
            prev_vowel = False
        else:
            prev_vowel = True
    return m


def _has_vowel(stem: str) -> bool:
    return any(not _is_cons(stem, i) for i in range(len(stem)))


def _double_cons(word: str) -> bool:
    return len(word) >= 2 and word[-1] == word[-2] and _is_cons(word, len(word) - 1)


def _cvc(word: str) -> bool:
    if len(word) < 3:
        return False
    return (
        _is_cons(word, len(word) - 3)
        and not _is_cons(word, len(word) - 2)
        and _is_cons(word, len(word) - 1)
        and word[-1] not in "wxy"
    )


def _rule(word: str, rules: Sequence[tuple[str, str]], min_measure: int) -> str:
    """Apply the longest matching suffix rule iff the measure condition
    holds on its stem; a failed condition on the longest match fires
    nothing (no fallback to shorter suffixes)."""
    match = None
    for suffix, replacement in rules:
        if word.endswith(suffix) and (match is None or len(suffix) > len(match[0])):
            match = (suffix, replacement)
    if match is None:
        return word
    stem = word[: len(word) - len(match[0])]
    if _measure(stem) > min_measure:
        return stem + match[1]
    return word


def porter_stem(word: str) -> str:
    """Porter's 1980 suffix-stripping algorithm over lowercase words."""
    word = word.lower()
    if len(word) <= 2:
        return word

    # Step 1a
    if word.endswith("sses"):
        word = word[:-2]
    elif word.endswith("ies"):
        word = word[:-2]
    elif word.endswith("ss"):
        pass
    elif word.endswith("s"):
        word = word[:-1]

    # Step 1b
    fired = False
    if word.endswith("eed"):
        if _measure(word[:-3]) > 0:
            word = word[:-1]
    elif word.endswith("ed") and _has_vowel(word[:-2]):
        word = word[:-2]
        fired = True
    elif word.endswith("ing") and _has_vowel(word[:-3]):
        word = word[:-3]
        fired = True
    if fired:
        if word.endswith(("at", "bl", "iz")):
            word += "e"
        elif _double_cons(word) and word[-1] not in "lsz":
            word = word[:-1]
        elif _measure(word) == 1 and _cvc(word):
            word += "e"

    # Step 1c
    if word.endswith("y") and _has_vowel(word[:-1]):
        word = word[:-1] + "i"

    word = _rule(
        word,
        [
            ("ational", "ate"), ("tional", "tion"), ("enci", "ence"),
            ("anci", "ance"), ("izer", "ize"), ("abli", "able"),
            ("alli", "al"), ("entli", "ent"), ("eli", "e"),
            ("ousli", "ous"), ("ization", "ize"), ("ation", "ate"),
            ("ator", "ate"), ("alism", "al"), ("iveness", "ive"),
            ("fulness", "ful"), ("ousness", "ous"), ("aliti", "al"),
            ("iviti", "ive"), ("biliti", "ble"),
        ],
        0,
    )
    word = _rule(
        word,
        [
            ("icate", "ic"), ("ative", ""), ("alize", "al"),
            ("iciti", "ic"), ("ical", "ic"), ("ful", ""), ("ness", ""),
        ],
        0,
    )

    # Step 4: plain removal at measure > 1, with the s/t guard on "ion".
    match = None
    for suffix in (
        "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement",
        "ment", "ent", "ion", "ou", "ism", "ate", "iti", "ous", "ive", "ize",
    ):
        if word.endswith(suffix) and (match is None or len(suffix) > len(match)):
            match = suffix
    if match is not None:
        stem = word[: len(word) - len(match)]
        if _measure(stem) > 1 and (match != "ion" or stem.endswith(("s", "t"))):
            word = stem

    # Step 5a
    if word.endswith("e"):
        stem = word[:-1]
        m = _measure(stem)
        if m > 1 or (m == 1 and not _cvc(stem)):
            word = stem
    # Step 5b
    if _measure(word) > 1 and _double_cons(word) and word.endswith("l"):
        word = word[:-1]
    return word


# ---------------------------------------------------------------------------
# METEOR


def _stage_pairs(
    cand: Sequence[str],
    ref: Sequence[str],
    cand_free: Sequence[int],
    ref_free: Sequence[int],
    key: Callable[[str], str],
) -> list[tuple[int, int]]:
    return [
        (i, j) for i in cand_free for j in ref_free if key(cand[i]) == key(ref[j])
    ]


class _Budget:
    __slots__ = ("left",)

    def __init__(self, n: int):
        self.left = n

    def spend(self) -> bool:
        if self.left <= 0:
            return False
        self.left -= 1
        return True


def _max_matchings(
    pairs: Sequence[tuple[int, int]], budget: _Budget
) -> tuple[int, list[dict[int, int]]]:
    """All maximum one-to-one matchings over `pairs` (the empty matching when
    there are none).  Enumeration order is deterministic; when the node
    budget runs out the partial result set is returned, which keeps the
    metric deterministic on degenerate inputs."""
    options: dict[int, list[int]] = {}
    for i, j in pairs:
        options.setdefault(i, []).append(j)
    cands = sorted(options)
    best_size = 0
    results: list[dict[int, int]] = [{}]

    def extend(k: int, used_ref: set[int], current: dict[int, int]) -> None:
        nonlocal best_size, results
        if not budget.spend():
            return
        # Even matching every remaining candidate cannot beat the best:
        if len(current) + (len(cands) - k) < best_size:
            return
        if k == len(cands):
            if len(current) > best_size:
                best_size = len(current)
                results = [dict(current)]
            elif len(current) == best_size:
                results.append(dict(current))
            return
        i = cands[k]
        for j in options[i]:
            if j in used_ref:
                continue
            current[i] = j
            used_ref.add(j)
            extend(k + 1, used_ref, current)
            del current[i]
            used_ref.discard(j)
        extend(k + 1, used_ref, current)

    extend(0, set(), {})
    if not results:
        results = [{}]
    return best_size, results


def _chunk_count(alignment: dict[int, int]) -> int:
    if not alignment:
        return 0
    items = sorted(alignment.items())
    chunks = 1
    for (i0, j0), (i1, j1) in zip(items, items[1:]):
        if not (i1 == i0 + 1 and j1 == j0 + 1):
            chunks += 1
    return chunks


def meteor(candidate: str, references: Sequence[str]) -> float:
    """Two-stage METEOR: exact matches first, Porter-stem matches on the
    residue, maximizing total matches and then minimizing chunks.

    score = F_mean * (1 - penalty) with F_mean = 10PR/(R + 9P) and
    penalty = 0.5 * (chunks/matches)^3; zero matches scores 0; the best
    reference wins.
    """
    if not references:
        raise ValueError("meteor needs at least one reference")
    cand = tokenize(candidate)
    if not cand:
        return 0.0

    best = 0.0
    for reference in references:
        ref = tokenize(reference)
        if not ref:
            continue
        budget = _Budget(_ALIGN_BUDGET)
        exact = _stage_pairs(cand, ref, range(len(cand)), range(len(ref)), str)
        _, exact_matchings = _max_matchings(exact, budget)
        best_key: tuple[int, int] | None = None
        best_score = 0.0
        for first in exact_matchings:
            cand_free = [i for i in range(len(cand)) if i not in first]
            ref_free = [j for j in range(len(ref)) if j not in first.values()]
            stem_pairs = _stage_pairs(cand, ref, cand_free, ref_free, porter_stem)
            _, stem_matchings = _max_matchings(stem_pairs, budget)
            for second in stem_matchings:
                full = dict(first)
                full.update(second)
                m = len(full)
                if m == 0:
                    continue
                chunks = _chunk_count(full)
                key = (m, -chunks)
                if best_key is None or key > best_key:
                    best_key = key
                    p = m / len(cand)
                    r = m / len(ref)
                    f_mean = 10 * p * r / (r + 9 * p)
                    penalty = 0.5 * (chunks / m) ** 3
                    best_score = f_mean * (1 - penalty)
        best = max(best, best_score)
    return best


# ---------------------------------------------------------------------------
# BERTScore-style greedy matching


def bertscore(
    candidate: str, references: Sequence[str], token_embedder: TokenEmbedder
) -> tuple[float, float, float]:
    """Greedy embedding matching: P averages each candidate token's best
    cosine against the reference, R the symmetric direction, F1 the harmonic
    mean.  Similarities are clamped into [0, 1] (a self-cosine can round an
    ulp above 1) and out-of-vocabulary tokens contribute 0, so every
    component stays in [0, 1].  Multi-reference result is the (P, R, F1) of
    the reference with the best F1.
    """
    if not references:
        raise ValueError("bertscore needs at least one reference")
    cand = tokenize(candidate)
    if not cand:
        return (0.0, 0.0, 0.0)

    cache: dict[str, tuple[float, ...] | None] = {}

    def vec(token: str) -> tuple[float, ...] | None:
        if token not in cache:
            v = token_embedder(token)
            cache[token] = None if v is None else tuple(float(x) for x in v)
        return cache[token]

    def sim(a: str, b: str) -> float:
        u, v = vec(a), vec(b)
        if u is None or v is None:
            return 0.0
        dot = sum(x * y for x, y in zip(u, v))
        nu = math.sqrt(sum(x * x for x in u))
        nv = math.sqrt(sum(y * y for y in v))
        if nu == 0.0 or nv == 0.0:
            return 0.0
        return min(1.0, max(0.0, dot / (nu * nv)))

    best = (0.0, 0.0, 0.0)
    for reference in references:
        ref = tokenize(reference)
        if not ref:
            continue
        p = min(1.0, sum(max((sim(c, r) for r in ref), default=0.0) for c in cand) / len(cand))
        r = min(1.0, sum(max((sim(t, c) for c in cand), default=0.0) for t in ref) / len(ref))
        f1 = 0.0 if p + r == 0.0 else min(1.0, 2 * p * r / (p + r))
        if f1 > best[2]:
            best = (p, r, f1)
    return best
