"""Read-only JSON-over-HTTP retrieval service.

Exposes the datastore to external generation stacks without ever leaking
stored vectors or source ids: responses carry only triplet texts, ids and
similarity scores. Query embeddings arrive as a JSON float array
("embedding") or, for exact f32 fidelity, as base64 little-endian raw
bytes ("embedding_b64"); raw mode is the documented wire-equivalence
surface.
"""

from __future__ import annotations

import base64
import json
from typing import Optional, Sequence

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .config import MAX_K
from .errors import DimensionMismatch, NoQualifyingPathology, ZeroVector
from .kg_store import TripletRecord
from .pathology import Certainty, PathologyPrediction
from .prompts import assemble_prompt, render_pathology_phrase, select_template
from .vector_index import EmbeddingVector, FlatIndex, IvfIndex, search_ivf, top_k


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse({"code": code, "error": message}, status_code=status)


def _parse_embedding(body: dict) -> np.ndarray:
    if "embedding_b64" in body:
        try:
            raw = base64.b64decode(body["embedding_b64"], validate=True)
        except Exception:
            raise ValueError("embedding_b64 is not valid base64")
        if len(raw) % 4 != 0 or len(raw) == 0:
            raise ValueError("embedding_b64 length is not a positive multiple of 4")
        return np.frombuffer(raw, dtype="<f4").copy()
    if "embedding" in body:
        values = body["embedding"]
        if not isinstance(values, list) or not values or \
                not all(isinstance(v, (int, float)) for v in values):
            raise ValueError("embedding must be a nonempty number array")
        return np.asarray(values, dtype=np.float32)
    raise ValueError("request needs 'embedding' or 'embedding_b64'")


def create_app(index: Optional[FlatIndex | IvfIndex] = None,
               records: Optional[Sequence[TripletRecord]] = None,
               default_k: int = 7) -> FastAPI:
    app = FastAPI(title="kgrag retrieval service")
    state = {"index": index,
             "records": list(records or []),
             "texts": {r.id: r.canonical_text for r in records or []}}

    def search(query: EmbeddingVector, k: int):
        idx = state["index"]
        if isinstance(idx, IvfIndex):
            return search_ivf(idx, query, k)
        return top_k(idx, query, k)

    @app.get("/healthz")
    def healthz():
        idx = state["index"]
        if idx is None:
            return _error(503, "NOT_READY", "index not loaded")
        return {"status": "ok", "index_count": len(idx)}

    async def _read_body(request: Request) -> dict:
        try:
            body = json.loads(await request.body())
        except (json.JSONDecodeError, UnicodeDecodeError):
            raise ValueError("body is not valid JSON")
        if not isinstance(body, dict):
            raise ValueError("body must be a JSON object")
        return body

    @app.post("/v1/retrieve")
    async def retrieve(request: Request):
        idx = state["index"]
        if idx is None:
            return _error(503, "NOT_READY", "index not loaded")
        try:
            body = await _read_body(request)
        except ValueError as exc:
            return _error(400, "BAD_JSON", str(exc))
        try:
            values = _parse_embedding(body)
            k = body.get("k", default_k)
            if not isinstance(k, int) or not 1 <= k <= MAX_K:
                raise ValueError(f"k must be an integer in 1..{MAX_K}")
        except ValueError as exc:
            return _error(400, "BAD_REQUEST", str(exc))
        try:
            hits = search(EmbeddingVector(0, values), k)
        except DimensionMismatch as exc:
            return _error(400, "DIM_MISMATCH", str(exc))
        except ZeroVector as exc:
            return _error(400, "ZERO_VECTOR", str(exc))
        return {"hits": [{"id": h.id, "score": h.score,
                          "text": state["texts"].get(h.id, "")} for h in hits]}

    @app.post("/v1/prompt")
    async def prompt(request: Request):
        idx = state["index"]
        if idx is None:
            return _error(503, "NOT_READY", "index not loaded")
        try:
            body = await _read_body(request)
        except ValueError as exc:
            return _error(400, "BAD_JSON", str(exc))
        try:
            values = _parse_embedding(body)
            k = body.get("k", default_k)
            if not isinstance(k, int) or not 1 <= k <= MAX_K:
                raise ValueError(f"k must be an integer in 1..{MAX_K}")
            template_index = body.get("template_index", 0)
            if not isinstance(template_index, int):
                raise ValueError("template_index must be an integer")
            raw_paths = body.get("pathologies")
            if not isinstance(raw_paths, list) or not raw_paths:
                raise ValueError("pathologies must be a nonempty array")
            predictions = []
            for item in raw_paths:
                try:
                    cert = Certainty[item["certainty"]]
                except (KeyError, TypeError):
                    raise ValueError("each pathology needs a label and a "
                                     "certainty in negative/uncertain/positive")
                predictions.append(PathologyPrediction(str(item["label"]),
                                                       0.0, cert))
        except ValueError as exc:
            return _error(400, "BAD_REQUEST", str(exc))
        try:
            hits = search(EmbeddingVector(0, values), k)
        except DimensionMismatch as exc:
            return _error(400, "DIM_MISMATCH", str(exc))
        except ZeroVector as exc:
            return _error(400, "ZERO_VECTOR", str(exc))
        try:
            phrase = render_pathology_phrase(predictions,
                                             include=tuple(Certainty))
        except NoQualifyingPathology as exc:
            return _error(400, "BAD_REQUEST", str(exc))
        question = select_template(template_index, phrase)
        # assemble_prompt reads only canonical_text, so nothing beyond
        # triplet texts reaches the wire.
        bundle = assemble_prompt(question, hits, state["records"],
                                 style="kg", phrase=phrase)
        return {"prompt": bundle.rendered}

    return app
