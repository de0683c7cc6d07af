"""Shared fixtures: the engineered toy embedding space, linguistic
resources, corpus builders, and an in-process wire-protocol stub server."""
from __future__ import annotations

import json
import random
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from explattack.corpus import EmbeddingTable, Label, NliExample, PosLexicon, tokenize
from explattack.victim import (
    KeywordExpl2Label,
    RulePairClassifier,
    TemplateExplainer,
)

# Three-dimensional toy space with tight synonym clusters (animals, felines,
# rest verbs, motion verbs), a few function words, and two deliberately
# mid-similarity words (beast, critter) whose cosine to their cluster heads
# falls between the usual 0.70 and 0.75 sentence thresholds.
VECTORS: dict[str, tuple[float, float, float]] = {
    "dog": (1.00, 0.05, 0.00),
    "puppy": (0.98, 0.10, 0.00),
    "hound": (0.97, 0.12, 0.00),
    "animal": (0.90, 0.40, 0.10),
    "beast": (0.72, 0.68, 0.10),
    "cat": (0.00, 1.00, 0.05),
    "kitten": (0.05, 0.98, 0.10),
    "feline": (0.02, 0.97, 0.12),
    "critter": (0.66, 0.72, 0.12),
    "sleeps": (0.30, 0.30, 0.90),
    "rests": (0.32, 0.30, 0.88),
    "naps": (0.31, 0.28, 0.91),
    "runs": (0.60, 0.10, 0.70),
    "sprints": (0.62, 0.12, 0.68),
    "park": (0.70, 0.70, 0.10),
    "garden": (0.68, 0.72, 0.12),
    "person": (0.40, 0.80, 0.30),
    "woman": (0.42, 0.78, 0.32),
    "man": (0.41, 0.79, 0.28),
    "a": (0.50, 0.50, 0.50),
    "an": (0.49, 0.51, 0.50),
    "the": (0.50, 0.50, 0.45),
    "is": (0.45, 0.45, 0.55),
    "no": (0.10, 0.15, 0.20),
    "not": (0.12, 0.14, 0.21),
    "never": (0.09, 0.16, 0.19),
}

STOPWORDS = frozenset({"a", "an", "the", "is"})

POS_TAGS_BY_WORD = {
    "dog": {"NOUN"},
    "puppy": {"NOUN"},
    "hound": {"NOUN"},
    "animal": {"NOUN"},
    "beast": {"NOUN"},
    "cat": {"NOUN"},
    "kitten": {"NOUN"},
    "feline": {"NOUN"},
    "critter": {"NOUN"},
    "park": {"NOUN"},
    "garden": {"NOUN"},
    "person": {"NOUN"},
    "woman": {"NOUN"},
    "man": {"NOUN"},
    "sleeps": {"VERB"},
    "rests": {"VERB"},
    "naps": {"VERB"},
    "runs": {"VERB"},
    "sprints": {"VERB"},
    "is": {"VERB"},
    "a": {"OTHER"},
    "an": {"OTHER"},
    "the": {"OTHER"},
    "no": {"OTHER"},
    "not": {"OTHER"},
    "never": {"OTHER"},
}


@pytest.fixture(scope="session")
def table() -> EmbeddingTable:
    return EmbeddingTable({w: list(v) for w, v in VECTORS.items()})


@pytest.fixture(scope="session")
def stopwords() -> frozenset[str]:
    return STOPWORDS


@pytest.fixture(scope="session")
def pos_lexicon() -> PosLexicon:
    return PosLexicon(
        entries={w: frozenset(tags) for w, tags in POS_TAGS_BY_WORD.items()}
    )


NOUNS = [
    "dog", "puppy", "hound", "animal", "beast", "cat", "kitten", "feline",
    "critter", "park", "garden", "person", "woman", "man",
]
VERBS = ["sleeps", "rests", "naps", "runs", "sprints"]


def random_corpus(
    n: int, seed: int, victim: RulePairClassifier
) -> list[NliExample]:
    """Random premise/hypothesis pairs over the toy vocabulary.

    Gold labels are the rule victim's own predictions, so a campaign over
    this corpus attempts every example (nothing is skipped), which is what
    the constraint-soundness and monotonicity checks want.
    """
    rng = random.Random(seed)
    examples = []
    for i in range(n):
        premise = f"{rng.choice(['a', 'the'])} {rng.choice(NOUNS)} {rng.choice(VERBS)}"
        shape = rng.random()
        det = rng.choice(["a", "the"])
        if shape < 0.25:
            hypothesis = f"no {rng.choice(NOUNS)} {rng.choice(VERBS)}"
        elif shape < 0.5:
            hypothesis = f"{det} {rng.choice(NOUNS)}"
        elif shape < 0.75:
            hypothesis = f"{det} {rng.choice(NOUNS)} {rng.choice(VERBS)}"
        else:
            hypothesis = f"{rng.choice(NOUNS)} {rng.choice(VERBS)}"
        gold = victim.classify(premise, hypothesis).label
        examples.append(
            NliExample(
                id=str(i),
                premise=premise,
                hypothesis=hypothesis,
                gold_label=gold,
                reference_explanations=(f"{hypothesis} follows from {premise}",),
            )
        )
    return examples


def write_embeddings(path) -> None:
    lines = [f"{w} {v[0]} {v[1]} {v[2]}" for w, v in VECTORS.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_stopwords(path) -> None:
    path.write_text("\n".join(sorted(STOPWORDS)) + "\n", encoding="utf-8")


def write_pos_lexicon(path) -> None:
    lines = [f"{w}\t{','.join(sorted(tags))}" for w, tags in POS_TAGS_BY_WORD.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Wire-protocol stub server


class _WireHandler(BaseHTTPRequestHandler):
    def log_message(self, *args) -> None:  # keep pytest output clean
        pass

    def _send(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self) -> None:
        if self.path == "/health":
            self._send(200, {"status": "ok"})
        else:
            self._send(404, {"error": f"no such endpoint {self.path}"})

    def do_POST(self) -> None:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length)
        try:
            payload = json.loads(raw) if raw else {}
        except ValueError:
            self._send(400, {"error": "request body is not JSON"})
            return
        route = self.server.routes.get(self.path)  # type: ignore[attr-defined]
        if route is None:
            self._send(404, {"error": f"no such endpoint {self.path}"})
            return
        try:
            status, response = route(payload)
        except Exception as exc:  # stub server: surface the failure as 500
            status, response = 500, {"error": repr(exc)}
        self._send(status, response)


@pytest.fixture
def wire_server_factory():
    """Start stub servers speaking the wire protocol; routes is a mapping
    path -> callable(request dict) -> (status, response dict)."""
    servers: list[ThreadingHTTPServer] = []

    def start(routes: dict) -> str:
        server = ThreadingHTTPServer(("127.0.0.1", 0), _WireHandler)
        server.routes = routes  # type: ignore[attr-defined]
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        servers.append(server)
        return f"http://127.0.0.1:{server.server_address[1]}"

    yield start
    for server in servers:
        server.shutdown()
        server.server_close()


def default_wire_routes(table: EmbeddingTable, stopwords: frozenset[str]) -> dict:
    """Well-behaved endpoints backed by the local desk victims."""
    rule = RulePairClassifier(table, stopwords)
    template = TemplateExplainer(table, stopwords)
    keyword = KeywordExpl2Label()

    def embed(body: dict):
        vectors = []
        for text in body["texts"]:
            vecs = [v for t in tokenize(text) if (v := table.lookup(t)) is not None]
            if vecs:
                vectors.append([float(x) for x in np.mean(vecs, axis=0)])
            else:
                # The stub always embeds something; OOV-only text gets a
                # fixed off-axis direction.
                vectors.append([1.0, 1.0, 1.0])
        return 200, {"vectors": vectors}

    return {
        "/classify": lambda b: (
            200,
            rule.classify(b["premise"], b["hypothesis"]).to_wire(),
        ),
        "/classify_expl": lambda b: (
            200,
            keyword.classify_explanation(b["explanation"]).to_wire(),
        ),
        "/explain": lambda b: (
            200,
            {"explanation": template.explain(b["premise"], b["hypothesis"])},
        ),
        "/embed": embed,
        "/mlm_candidates": lambda b: (
            200,
            {
                "candidates": table.nearest(
                    b["tokens"][b["mask_index"]], b["k"], 0.0
                )
            },
        ),
    }


@pytest.fixture
def wire_server(wire_server_factory, table, stopwords) -> str:
    return wire_server_factory(default_wire_routes(table, stopwords))
