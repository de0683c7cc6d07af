"""Explanation-quality metrics against independently derived golden values.

The expected numbers are frozen literals; `python3 tests/oracles.py` reprints
them from the stdlib-only oracle implementations for auditing.
"""
import pytest
from hypothesis import given
from hypothesis import strategies as st

from explattack.nlgmetrics import (
    MetricScore,
    bertscore,
    bleu,
    meteor,
    porter_stem,
    rouge_l,
)

# Token-level embedding tables used by the bertscore goldens.
T3 = {"good": (1.0, 0.0, 0.0), "bad": (0.0, 1.0, 0.0), "up": (0.0, 0.0, 1.0)}
T4 = {"good": (1.0, 0.0), "great": (0.9, 0.1), "nice": (0.8, 0.2), "bad": (-1.0, 0.0)}


def embedder(table):
    return lambda token: table.get(token)


# name, candidate, references, expected
BLEU_GOLDENS = [
    ("identical4", "the cat sat down", ["the cat sat down"], 1.0),
    ("spec_mat", "the cat sat on the mat", ["the cat sat on a mat"], 0.5372849659),
    ("no_overlap", "dog runs fast", ["the cat sat"], 0.0),
    ("short_cand_bp", "the cat", ["the cat sat"], 0.6065306597),
    ("smoothing_mid", "the dog sat on the mat", ["the cat sat on a mat"], 0.2857440430),
    ("clip_union", "the the the", ["the cat", "the the dog"], 0.6389431042),
    ("bp_tie_shorter", "a b c", ["a b", "a b c d"], 1.0),
    ("single_identical", "cat", ["cat"], 1.0),
    ("clipping_long", "cat cat cat cat", ["cat cat"], 0.4082482905),
    ("two_refs_union", "the cat sat", ["the cat", "cat sat"], 0.8408964153),
]

ROUGE_GOLDENS = [
    ("identical", "a b c", ["a b c"], 1.0),
    ("spec_ran", "the cat sat", ["the cat ran"], 0.6666666667),
    ("subseq", "the cat", ["the big cat"], 0.8),
    ("reorder", "cat the", ["the cat"], 0.5),
    ("multi_ref", "a b c", ["a x c", "a b c d"], 0.8571428571),
    ("repeats", "a a b", ["a b b"], 0.6666666667),
    ("long_cand", "the quick brown fox", ["the fox"], 0.6666666667),
    ("tail_match", "x y z", ["a b z"], 0.3333333333),
    ("gapped", "b d", ["a b c d"], 0.6666666667),
    ("no_overlap", "x y", ["a b"], 0.0),
]

METEOR_GOLDENS = [
    ("identical3", "a b c", ["a b c"], 0.9814814815),
    ("spec_catdog", "the cat", ["the dog"], 0.25),
    ("identical4", "a b c d", ["a b c d"], 0.9921875),
    ("swap2", "cat the", ["the cat"], 0.5),
    ("stem2", "the cats", ["the cat"], 0.9375),
    ("two_chunks", "a b x c d", ["a b y c d"], 0.75),
    ("precision_recall", "the cat", ["the cat sat"], 0.6465517241),
    ("multi_ref", "the cat", ["the dog", "the cat"], 0.9375),
    ("chunk_min", "a b a", ["a a b"], 0.8518518519),
    ("stems_both", "dogs run", ["dog runs"], 0.9375),
]

# name, candidate, references, table, (P, R, F1)
BERTSCORE_GOLDENS = [
    ("spec_goodup", "good bad", ["good up"], T3, (0.5, 0.5, 0.5)),
    ("oov_cand", "good zzz", ["good"], T3, (0.5, 1.0, 0.6666666667)),
    ("near", "good", ["great"], T4, (0.9938837347, 0.9938837347, 0.9938837347)),
    ("avg_two", "good nice", ["good"], T4, (0.9850712501, 1.0, 0.9924794891)),
    ("neg_floor", "bad", ["good"], T4, (0.0, 0.0, 0.0)),
    ("perm", "nice good", ["good"], T4, (0.9850712501, 1.0, 0.9924794891)),
    ("dup_tokens", "good good", ["good"], T4, (1.0, 1.0, 1.0)),
    ("identical", "good", ["good"], T3, (1.0, 1.0, 1.0)),
    ("orthogonal", "good", ["up"], T3, (0.0, 0.0, 0.0)),
    ("multi_ref_best", "good nice", ["bad", "good nice"], T4, (1.0, 1.0, 1.0)),
]

GOLDEN_TOL = 1e-9


class TestBleu:
    @pytest.mark.parametrize(
        "name,cand,refs,expected",
        BLEU_GOLDENS,
        ids=[g[0] for g in BLEU_GOLDENS],
    )
    def test_goldens(self, name, cand, refs, expected):
        assert bleu(cand, refs) == pytest.approx(expected, abs=GOLDEN_TOL)

    def test_empty_references_rejected(self):
        with pytest.raises(ValueError, match="reference"):
            bleu("the cat", [])

    def test_empty_candidate_scores_zero(self):
        assert bleu("", ["the cat"]) == 0.0

    def test_tokenizes_like_the_package(self):
        assert bleu("The cat sat down.", ["the cat sat down ."]) == 1.0

    def test_duplicate_reference_changes_nothing(self):
        for _, cand, refs, _ in BLEU_GOLDENS:
            assert bleu(cand, refs) == bleu(cand, refs + refs)

    @given(
        st.lists(st.sampled_from("a b c d".split()), max_size=8),
        st.lists(st.sampled_from("a b c d".split()), min_size=1, max_size=8),
    )
    def test_range(self, cand, ref):
        assert 0.0 <= bleu(" ".join(cand), [" ".join(ref)]) <= 1.0 + 1e-12


class TestRougeL:
    @pytest.mark.parametrize(
        "name,cand,refs,expected",
        ROUGE_GOLDENS,
        ids=[g[0] for g in ROUGE_GOLDENS],
    )
    def test_goldens(self, name, cand, refs, expected):
        assert rouge_l(cand, refs) == pytest.approx(expected, abs=GOLDEN_TOL)

    def test_empty_candidate_and_empty_reference(self):
        assert rouge_l("", ["a b"]) == 0.0
        assert rouge_l("a b", [""]) == 0.0

    def test_duplicate_reference_changes_nothing(self):
        assert rouge_l("a b c", ["a x c"]) == rouge_l("a b c", ["a x c", "a x c"])

    @given(
        st.lists(st.sampled_from("a b c".split()), max_size=8),
        st.lists(st.sampled_from("a b c".split()), min_size=1, max_size=8),
    )
    def test_range(self, cand, ref):
        assert 0.0 <= rouge_l(" ".join(cand), [" ".join(ref)]) <= 1.0


class TestMeteor:
    @pytest.mark.parametrize(
        "name,cand,refs,expected",
        METEOR_GOLDENS,
        ids=[g[0] for g in METEOR_GOLDENS],
    )
    def test_goldens(self, name, cand, refs, expected):
        assert meteor(cand, refs) == pytest.approx(expected, abs=GOLDEN_TOL)

    def test_identity_formula(self):
        # A perfect match is one chunk of m matches: 1 - 0.5 / m^3.
        for m in (1, 2, 3, 5, 8):
            text = " ".join(f"w{i}" for i in range(m))
            assert meteor(text, [text]) == pytest.approx(1.0 - 0.5 / m**3)

    def test_empty_candidate(self):
        assert meteor("", ["a b"]) == 0.0

    def test_duplicate_reference_changes_nothing(self):
        assert meteor("the cats", ["the cat"]) == meteor(
            "the cats", ["the cat", "the cat"]
        )

    def test_degenerate_repeats_are_deterministic(self):
        cand = " ".join(["a"] * 9)
        refs = [" ".join(["a"] * 9)]
        assert meteor(cand, refs) == meteor(cand, refs)

    @given(
        st.lists(st.sampled_from("a b c".split()), max_size=6),
        st.lists(st.sampled_from("a b c".split()), min_size=1, max_size=6),
    )
    def test_range(self, cand, ref):
        assert 0.0 <= meteor(" ".join(cand), [" ".join(ref)]) <= 1.0


class TestBertscore:
    @pytest.mark.parametrize(
        "name,cand,refs,table,expected",
        BERTSCORE_GOLDENS,
        ids=[g[0] for g in BERTSCORE_GOLDENS],
    )
    def test_goldens(self, name, cand, refs, table, expected):
        got = bertscore(cand, refs, embedder(table))
        assert got == pytest.approx(expected, abs=GOLDEN_TOL)

    def test_empty_references_rejected(self):
        with pytest.raises(ValueError, match="reference"):
            bertscore("good", [], embedder(T4))

    def test_empty_candidate(self):
        assert bertscore("", ["good"], embedder(T4)) == (0.0, 0.0, 0.0)

    def test_token_order_is_irrelevant(self):
        table = dict(T4, the=(0.0, 1.0), cat=(0.5, 0.5))
        a = bertscore("the good cat", ["the great cat"], embedder(table))
        b = bertscore("cat the good", ["great cat the"], embedder(table))
        assert a == pytest.approx(b)

    def test_components_in_range(self):
        p, r, f1 = bertscore("good bad nice", ["great up bad"], embedder(dict(T4, up=(0.0, 1.0))))
        for v in (p, r, f1):
            assert 0.0 <= v <= 1.0


class TestPorterStemmer:
    # Full-pipeline outputs, hand-traced through all five steps of the
    # 1980 algorithm (note these differ from the per-step illustrations:
    # later steps keep rewriting, e.g. relational -> relate -> relat).
    VECTORS = [
        ("caresses", "caress"),
        ("ponies", "poni"),
        ("ties", "ti"),
        ("caress", "caress"),
        ("cats", "cat"),
        ("feed", "feed"),
        ("agreed", "agre"),
        ("plastered", "plaster"),
        ("bled", "bled"),
        ("motoring", "motor"),
        ("sing", "sing"),
        ("conflated", "conflat"),
        ("troubled", "troubl"),
        ("sized", "size"),
        ("hopping", "hop"),
        ("tanned", "tan"),
        ("falling", "fall"),
        ("hissing", "hiss"),
        ("fizzed", "fizz"),
        ("failing", "fail"),
        ("filing", "file"),
        ("happy", "happi"),
        ("sky", "sky"),
        ("relational", "relat"),
        ("conditional", "condit"),
        ("rational", "ration"),
        ("digitizer", "digit"),
        ("radicalli", "radic"),
        ("differentli", "differ"),
        ("vileli", "vile"),
        ("vietnamization", "vietnam"),
        ("predication", "predic"),
        ("operator", "oper"),
        ("feudalism", "feudal"),
        ("decisiveness", "decis"),
        ("hopefulness", "hope"),
        ("formaliti", "formal"),
        ("formative", "form"),
        ("formalize", "formal"),
        ("electriciti", "electr"),
        ("electrical", "electr"),
        ("hopeful", "hope"),
        ("goodness", "good"),
        ("revival", "reviv"),
        ("allowance", "allow"),
        ("inference", "infer"),
        ("airliner", "airlin"),
        ("adjustable", "adjust"),
        ("defensible", "defens"),
        ("replacement", "replac"),
        ("adjustment", "adjust"),
        ("dependent", "depend"),
        ("adoption", "adopt"),
        ("communism", "commun"),
        ("activate", "activ"),
        ("effective", "effect"),
        ("rate", "rate"),
        ("controll", "control"),
        ("roll", "roll"),
        ("walking", "walk"),
        ("walked", "walk"),
        ("running", "run"),
        ("runs", "run"),
        ("dogs", "dog"),
    ]

    @pytest.mark.parametrize("word,stem", VECTORS, ids=[v[0] for v in VECTORS])
    def test_vectors(self, word, stem):
        assert porter_stem(word) == stem

    def test_short_words_unchanged(self):
        for w in ("a", "is", "be", "ox"):
            assert porter_stem(w) == w


class TestMetricScore:
    def test_from_samples_mean(self):
        score = MetricScore.from_samples("bleu", [0.5, 0.7, 0.9])
        assert score.corpus == pytest.approx(0.7)
        assert score.per_sample == (0.5, 0.7, 0.9)

    def test_empty_samples(self):
        assert MetricScore.from_samples("bleu", []).corpus == 0.0

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError, match="outside"):
            MetricScore.from_samples("bleu", [1.5])
