"""The attack harness's remote clients driven against a live server.

This is the compatibility gate for the wire protocol: every client class the
harness ships (pair classifier, explanation classifier, explainer, sentence
encoder, masked-LM provider) must work against this server unmodified, and
full campaigns must run and stay byte-deterministic.
"""

import json

import numpy as np
import pytest

from explattack import (
    AttackConfig,
    AttackRecord,
    AttackResources,
    AttackStatus,
    ClassifierOutput,
    EmbeddingTable,
    ExplainThenPredict,
    Label,
    NliExample,
    Recipe,
    RemoteEncoder,
    RemoteExplainer,
    RemoteExplanationClassifier,
    RemoteMlmProvider,
    RemotePairClassifier,
    TargetField,
    VictimError,
    run_campaign,
    sentence_similarity,
)

STAMP = "2026-01-01T00:00:00+00:00"
PREMISE = "the dog runs outside"
HYPOTHESIS = "an animal moves"


class TestRemotePairClassifier:
    def test_classify_returns_normalized_output(self, toy_url):
        out = RemotePairClassifier(toy_url).classify(PREMISE, HYPOTHESIS)
        assert isinstance(out, ClassifierOutput)
        assert isinstance(out.label, Label)
        assert abs(sum(out.probs) - 1.0) < 1e-9

    def test_classify_is_deterministic(self, toy_url):
        clf = RemotePairClassifier(toy_url)
        assert clf.classify(PREMISE, HYPOTHESIS) == clf.classify(PREMISE, HYPOTHESIS)

    def test_overlength_input_surfaces_as_victim_error(self, toy_url):
        clf = RemotePairClassifier(toy_url)
        with pytest.raises(VictimError, match="returned 413"):
            clf.classify("w " * 129, "x")

    def test_unreachable_server_surfaces_as_victim_error(self):
        clf = RemotePairClassifier("http://127.0.0.1:9", timeout=2.0)
        with pytest.raises(VictimError, match="failed"):
            clf.classify("a", "b")


class TestRemoteExplanationClassifier:
    def test_classify_explanation(self, toy_url):
        out = RemoteExplanationClassifier(toy_url).classify_explanation("a dog is an animal")
        assert isinstance(out, ClassifierOutput)
        assert abs(sum(out.probs) - 1.0) < 1e-9


class TestRemoteExplainer:
    def test_explain_nonempty_and_deterministic(self, toy_url):
        explainer = RemoteExplainer(toy_url)
        first = explainer.explain(PREMISE, HYPOTHESIS)
        assert isinstance(first, str) and first
        assert explainer.explain(PREMISE, HYPOTHESIS) == first


class TestRemoteEncoder:
    def test_encode_returns_one_array_per_text(self, toy_url):
        vectors = RemoteEncoder(toy_url).encode(["a dog", "an animal moves"])
        assert len(vectors) == 2
        for vec in vectors:
            assert isinstance(vec, np.ndarray)
            assert vec.dtype == np.float64
            assert vec.ndim == 1 and vec.size > 0

    def test_sentence_similarity_works_over_the_wire(self, toy_url):
        encoder = RemoteEncoder(toy_url)
        sim = sentence_similarity("the dog runs", "the dog runs", encoder)
        assert sim == pytest.approx(1.0)
        cross = sentence_similarity("the dog runs", "the cat sleeps indoors", encoder)
        assert -1.0 <= cross <= 1.0
        assert cross == sentence_similarity("the dog runs", "the cat sleeps indoors", encoder)


class TestRemoteMlmProvider:
    def test_candidates_are_capped_strings(self, toy_url):
        cands = RemoteMlmProvider(toy_url).candidates(["a", "dog", "runs"], 1, 8)
        assert len(cands) <= 8
        assert all(isinstance(c, str) for c in cands)
        assert "dog" not in cands

    def test_out_of_range_mask_surfaces_as_victim_error(self, toy_url):
        with pytest.raises(VictimError, match="returned 400"):
            RemoteMlmProvider(toy_url).candidates(["a"], 4, 2)


class TestRemotePipeline:
    def test_label_comes_from_the_explanation_alone(self, toy_url):
        pipeline = ExplainThenPredict(
            RemoteExplainer(toy_url), RemoteExplanationClassifier(toy_url)
        )
        explanation, output = pipeline.explain_and_classify(PREMISE, HYPOTHESIS)
        assert explanation
        rescored = RemoteExplanationClassifier(toy_url).classify_explanation(explanation)
        assert output == rescored

    def test_classify_agrees_with_explain_and_classify(self, toy_url):
        pipeline = ExplainThenPredict(
            RemoteExplainer(toy_url), RemoteExplanationClassifier(toy_url)
        )
        _, output = pipeline.explain_and_classify(PREMISE, HYPOTHESIS)
        assert pipeline.classify(PREMISE, HYPOTHESIS) == output


# ---------------------------------------------------------------------------
# Full campaigns through the remote stack

VECTORS = {
    "dog": (1.0, 0.1, 0.0),
    "hound": (0.95, 0.18, 0.05),
    "puppy": (0.9, 0.05, 0.1),
    "cat": (0.0, 1.0, 0.1),
    "kitten": (0.08, 0.95, 0.18),
    "man": (0.1, 0.0, 1.0),
    "person": (0.2, 0.08, 0.95),
    "animal": (0.85, 0.4, 0.2),
    "runs": (0.7, 0.7, 0.0),
    "moves": (0.75, 0.65, 0.1),
    "sleeps": (0.0, 0.7, 0.7),
    "rests": (0.1, 0.68, 0.72),
    "outside": (0.4, 0.4, 0.4),
}

SENTENCES = [
    ("the dog runs outside", "a dog moves"),
    ("the dog runs outside", "a cat sleeps"),
    ("a cat sleeps", "the cat rests"),
    ("a man runs", "a person moves"),
    ("the kitten sleeps", "an animal rests"),
    ("a hound runs", "the dog moves outside"),
    ("the person sleeps", "a man rests"),
    ("a puppy moves", "an animal runs"),
    ("the cat runs", "a kitten moves"),
    ("a dog sleeps outside", "the hound rests"),
]


@pytest.fixture(scope="module")
def attacker_resources(toy_url):
    return AttackResources(
        embeddings=EmbeddingTable(VECTORS),
        stopwords=frozenset({"a", "an", "the", "is"}),
        encoder=RemoteEncoder(toy_url),
        mlm_provider=RemoteMlmProvider(toy_url),
    )


def build_examples(victim) -> list[NliExample]:
    """Gold labels come from the victim itself, so every attack is attempted."""
    return [
        NliExample(
            id=f"wire{i}",
            premise=premise,
            hypothesis=hypothesis,
            gold_label=victim.classify(premise, hypothesis).label,
            reference_explanations=("toy reference",),
        )
        for i, (premise, hypothesis) in enumerate(SENTENCES)
    ]


def load_records(out_dir) -> list[AttackRecord]:
    lines = (out_dir / "records.jsonl").read_text().splitlines()
    return [AttackRecord.from_json_dict(json.loads(line)) for line in lines]


def campaign_config(recipe: Recipe) -> AttackConfig:
    return AttackConfig(
        recipe=recipe,
        target_field=TargetField.HYPOTHESIS,
        max_candidates=8,
        sentence_sim_threshold=0.0,
        mlm_top_k=8,
        seed=0,
    )


class TestEndToEndCampaigns:
    @pytest.mark.parametrize("recipe", [Recipe.TEXTFOOLER_STYLE, Recipe.BERT_ATTACK_STYLE])
    def test_campaign_against_remote_victim(self, toy_url, attacker_resources, tmp_path, recipe):
        victim = RemotePairClassifier(toy_url)
        examples = build_examples(victim)
        summary = run_campaign(
            examples,
            victim,
            campaign_config(recipe),
            attacker_resources,
            tmp_path / "run",
            victim_label="remote-toy",
            timestamp=STAMP,
        )
        assert summary.total == len(examples)
        assert summary.skipped == 0 and summary.errored == 0
        records = load_records(tmp_path / "run")
        assert [r.example_id for r in records] == [e.id for e in examples]
        assert all(
            r.status in (AttackStatus.SUCCESS, AttackStatus.FAILED) for r in records
        )
        assert all(r.queries >= 2 for r in records)
        assert all(r.orig_output is not None for r in records)

    def test_campaign_is_byte_deterministic_over_the_wire(
        self, toy_url, attacker_resources, tmp_path
    ):
        victim = RemotePairClassifier(toy_url)
        examples = build_examples(victim)
        config = campaign_config(Recipe.TEXTFOOLER_STYLE)
        for name in ("one", "two"):
            run_campaign(
                examples,
                victim,
                config,
                attacker_resources,
                tmp_path / name,
                victim_label="remote-toy",
                timestamp=STAMP,
            )
        assert (tmp_path / "one" / "records.jsonl").read_bytes() == (
            tmp_path / "two" / "records.jsonl"
        ).read_bytes()
        assert (tmp_path / "one" / "summary.json").read_bytes() == (
            tmp_path / "two" / "summary.json"
        ).read_bytes()

    def test_pipeline_campaign_records_remote_explanations(
        self, toy_url, attacker_resources, tmp_path
    ):
        pipeline = ExplainThenPredict(
            RemoteExplainer(toy_url), RemoteExplanationClassifier(toy_url)
        )
        examples = build_examples(pipeline)
        summary = run_campaign(
            examples,
            pipeline,
            campaign_config(Recipe.TEXTFOOLER_STYLE),
            attacker_resources,
            tmp_path / "pipe",
            victim_label="remote-pipeline",
            timestamp=STAMP,
        )
        assert summary.total == len(examples)
        assert summary.skipped == 0
        records = load_records(tmp_path / "pipe")
        for record in records:
            assert record.orig_explanation, "pipeline records must carry the explanation"
            assert record.final_explanation
