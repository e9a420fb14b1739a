"""Prompt assembly: pathology-certainty phrases, the five instruction
templates, triplet-context rendering, and the pluggable generation backend
boundary (the language model itself lives behind it).
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import random
import time
from dataclasses import dataclass
from typing import Iterable, Optional, Protocol, Sequence

import httpx

from .errors import (BackendRefusal, BackendTimeout, BackendUnavailable,
                     NoQualifyingPathology, UnresolvedHitId)
from .kg_store import TripletRecord
from .pathology import Certainty, PathologyPrediction
from .vector_index import RetrievalHit

TEMPLATES = (
    "Which signs show that the patient has {pathologies}?",
    "Explain why these {pathologies} are present in the image?",
    "What evidence in the image indicates {pathologies}?",
    "How can you tell that the patient has {pathologies} from the image?",
    "What features suggest the presence of {pathologies} in this image?",
)

DEFAULT_INCLUDE = frozenset({Certainty.positive, Certainty.uncertain})

TRIPLET_JOIN = "; "


@dataclass(frozen=True)
class PromptBundle:
    question: str
    context_triplets: tuple[str, ...]
    pathology_phrase: str
    rendered: str


def render_pathology_phrase(predictions: Sequence[PathologyPrediction],
                            include: Iterable[Certainty] = DEFAULT_INCLUDE) -> str:
    """'{certainty} {Label}' items joined by ', ', in input order,
    e.g. 'positive Atelectasis, uncertain Edema'."""
    include = frozenset(include)
    kept = [p for p in predictions if p.certainty in include]
    if not kept:
        raise NoQualifyingPathology(
            f"no prediction with certainty in {sorted(c.name for c in include)}")
    return ", ".join(f"{p.certainty.name} {p.label}" for p in kept)


def select_template(index_or_seed: int, phrase: str, sample: bool = False) -> str:
    """Pick one of the five instruction templates (index mod 5 by default,
    seeded uniform draw in sampling mode) and substitute the phrase."""
    if sample:
        template = random.Random(index_or_seed).choice(TEMPLATES)
    else:
        template = TEMPLATES[index_or_seed % len(TEMPLATES)]
    return template.replace("{pathologies}", phrase)


def assemble_prompt(question: str, hits: Sequence[RetrievalHit],
                    records: Sequence[TripletRecord], style: str = "kg",
                    nle_texts: Optional[dict[int, str]] = None,
                    phrase: str = "") -> PromptBundle:
    """Join the retrieved context with the question.

    style='kg'  -> context is the hits' canonical triplet texts
    style='nle' -> context is retrieved explanation sentences (nle_texts)
    style='none'-> question only
    Layout: 'Context: {items joined by "; "}\\nQuestion: {q}' or
    'Question: {q}' for style='none'.
    """
    if style not in ("kg", "nle", "none"):
        raise ValueError(f"unknown style {style!r}")
    if style == "none":
        return PromptBundle(question, (), phrase, f"Question: {question}")

    by_id = {rec.id: rec for rec in records}
    context: list[str] = []
    for hit in hits:
        if style == "kg":
            rec = by_id.get(hit.id)
            if rec is None:
                raise UnresolvedHitId(f"hit id {hit.id} not in datastore")
            context.append(rec.canonical_text)
        else:
            if nle_texts is None or hit.id not in nle_texts:
                raise UnresolvedHitId(f"hit id {hit.id} has no explanation text")
            context.append(nle_texts[hit.id])
    rendered = f"Context: {TRIPLET_JOIN.join(context)}\nQuestion: {question}"
    return PromptBundle(question, tuple(context), phrase, rendered)


# --- generation backend boundary ----------------------------------------

@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    image_ref: Optional[str] = None
    max_tokens: int = 256
    timeout_ms: int = 30_000

    def __post_init__(self):
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")
        if self.timeout_ms < 1:
            raise ValueError("timeout_ms must be positive")


@dataclass(frozen=True)
class GenerationResponse:
    text: str
    backend_id: str
    latency_ms: int
    refused: bool = False


class GenerationBackend(Protocol):
    backend_id: str

    def complete(self, req: GenerationRequest) -> str: ...


class StubBackend:
    """Deterministic in-process stand-in for a generation LLM: echoes
    'STUB:' plus the first 32 hex chars of the prompt's SHA-256."""

    backend_id = "stub"

    def __init__(self, delay_s: float = 0.0):
        self.delay_s = delay_s

    def complete(self, req: GenerationRequest) -> str:
        if self.delay_s:
            time.sleep(self.delay_s)
        digest = hashlib.sha256(req.prompt.encode("utf-8")).hexdigest()
        return "STUB:" + digest[:32]


class HttpBackend:
    """JSON-over-HTTP adapter: POSTs {"prompt", "image_ref", "max_tokens"}
    and expects {"text": ...} back."""

    def __init__(self, url: str, backend_id: str = "http"):
        self.url = url
        self.backend_id = backend_id

    def complete(self, req: GenerationRequest) -> str:
        payload = {"prompt": req.prompt, "image_ref": req.image_ref,
                   "max_tokens": req.max_tokens}
        try:
            resp = httpx.post(self.url, json=payload,
                              timeout=req.timeout_ms / 1000.0)
        except httpx.TimeoutException as exc:
            raise BackendTimeout(str(exc)) from None
        except httpx.HTTPError as exc:
            raise BackendUnavailable(str(exc)) from None
        if resp.status_code != 200:
            raise BackendRefusal(f"HTTP {resp.status_code}", partial_text="")
        try:
            return resp.json()["text"]
        except (KeyError, ValueError) as exc:
            raise BackendRefusal(f"malformed backend response: {exc}") from None


def generate(backend: GenerationBackend, req: GenerationRequest) -> GenerationResponse:
    """Forward a request with a bounded wait: never blocks past timeout_ms
    plus scheduling slack."""
    start = time.monotonic()
    pool = concurrent.futures.ThreadPoolExecutor(max_workers=1)
    future = pool.submit(backend.complete, req)
    try:
        text = future.result(timeout=req.timeout_ms / 1000.0)
    except concurrent.futures.TimeoutError:
        pool.shutdown(wait=False, cancel_futures=True)
        raise BackendTimeout(
            f"backend {backend.backend_id!r} exceeded {req.timeout_ms} ms") from None
    finally:
        pool.shutdown(wait=False, cancel_futures=True)
    latency_ms = int((time.monotonic() - start) * 1000)
    if text is None:
        return GenerationResponse("", backend.backend_id, latency_ms, refused=True)
    return GenerationResponse(text, backend.backend_id, latency_ms)
