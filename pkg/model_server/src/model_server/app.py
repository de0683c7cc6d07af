"""HTTP surface: the five victim-protocol endpoints plus /health.

Requests may arrive concurrently (handlers are sync, so the framework runs
them on a thread pool), but each model's inference call sits behind its own
lock.  Overlength inputs are rejected with 413 before any model runs.
"""

from __future__ import annotations

import threading

import numpy as np
import uvicorn
from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .backends import Backends, load_backends
from .config import ServerConfig

_LABELS = ("entailment", "neutral", "contradiction")


class PairRequest(BaseModel):
    premise: str
    hypothesis: str


class ExplanationRequest(BaseModel):
    explanation: str


class EmbedRequest(BaseModel):
    texts: list[str]


class MlmRequest(BaseModel):
    tokens: list[str]
    mask_index: int
    k: int


def _wire_output(probs: np.ndarray) -> dict:
    total = float(probs.sum())
    if not np.isfinite(total) or total <= 0.0:
        raise HTTPException(status_code=500, detail="model produced a degenerate distribution")
    normed = [float(p) / total for p in probs]
    label = _LABELS[int(np.argmax(normed))]
    return {"label": label, "probs": dict(zip(_LABELS, normed))}


def build_app(backends: Backends, config: ServerConfig) -> FastAPI:
    app = FastAPI(title="explattack model server", docs_url=None, redoc_url=None)
    locks = {
        role: threading.Lock()
        for role in ("classifier", "explainer", "expl_classifier", "embedder", "mlm")
    }
    max_in = config.encoder_max_length

    @app.exception_handler(HTTPException)
    async def _http_error(_request: Request, exc: HTTPException) -> JSONResponse:
        return JSONResponse(status_code=exc.status_code, content={"error": str(exc.detail)})

    @app.exception_handler(RequestValidationError)
    async def _validation_error(
        _request: Request, exc: RequestValidationError
    ) -> JSONResponse:
        first = exc.errors()[0] if exc.errors() else {}
        where = ".".join(str(p) for p in first.get("loc", ())) or "body"
        return JSONResponse(
            status_code=422,
            content={"error": f"invalid request: {where}: {first.get('msg', 'bad value')}"},
        )

    def _check_length(count: int, what: str) -> None:
        if count > max_in:
            raise HTTPException(
                status_code=413,
                detail=f"{what} is {count} tokens, over the {max_in}-token limit",
            )

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.post("/classify")
    def classify(req: PairRequest) -> dict:
        model = backends.classifier
        _check_length(model.pair_token_count(req.premise, req.hypothesis), "premise+hypothesis")
        with locks["classifier"]:
            probs = model.classify_pair(req.premise, req.hypothesis)
        return _wire_output(probs)

    @app.post("/classify_expl")
    def classify_expl(req: ExplanationRequest) -> dict:
        model = backends.expl_classifier
        _check_length(model.count_tokens(req.explanation), "explanation")
        with locks["expl_classifier"]:
            probs = model.classify_text(req.explanation)
        return _wire_output(probs)

    @app.post("/explain")
    def explain(req: PairRequest) -> dict:
        model = backends.explainer
        _check_length(model.pair_token_count(req.premise, req.hypothesis), "premise+hypothesis")
        with locks["explainer"]:
            text = model.explain(req.premise, req.hypothesis)
        if not text:
            raise HTTPException(status_code=500, detail="explainer produced an empty string")
        return {"explanation": text}

    @app.post("/embed")
    def embed(req: EmbedRequest) -> dict:
        model = backends.embedder
        for i, text in enumerate(req.texts):
            _check_length(model.count_tokens(text), f"texts[{i}]")
        with locks["embedder"]:
            vectors = [[float(x) for x in model.embed_one(t)] for t in req.texts]
        return {"vectors": vectors}

    @app.post("/mlm_candidates")
    def mlm_candidates(req: MlmRequest) -> dict:
        if req.k < 0:
            raise HTTPException(status_code=400, detail=f"k must be non-negative, got {req.k}")
        if not 0 <= req.mask_index < len(req.tokens):
            raise HTTPException(
                status_code=400,
                detail=f"mask_index {req.mask_index} out of range for {len(req.tokens)} tokens",
            )
        _check_length(len(req.tokens), "tokens")
        with locks["mlm"]:
            cands = backends.mlm.candidates(req.tokens, req.mask_index, req.k)
        return {"candidates": [str(c) for c in cands]}

    return app


def serve(config: ServerConfig) -> None:
    """Load every model, then block serving requests until interrupted.

    Raises ModelLoadError before binding the port if any identifier cannot
    be resolved.
    """
    backends = load_backends(config)
    app = build_app(backends, config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
