"""Evaluation protocol: NLEs are scored only for correctly predicted
cases, AUC is computed pre-filter over all cases, and the ablation runners
reproduce the K-sweep and uni-modal vs cross-modal table structures.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from . import metrics
from .errors import MissingImageIndex
from .kg_store import TripletRecord
from .metrics import make_pair
from .pathology import Certainty, PathologyPrediction, ThresholdConfig, macro_auc
from .prompts import (GenerationBackend, GenerationRequest, StubBackend,
                      assemble_prompt, generate, render_pathology_phrase,
                      select_template)
from .vector_index import EmbeddingVector, FlatIndex, RetrievalHit, top_k

TOKENIZER_VERSION = "1"

METRIC_COLUMNS = ("B4", "METEOR", "R-L", "CIDEr")


@dataclass(frozen=True)
class CaseRecord:
    case_id: str
    predicted: tuple[PathologyPrediction, ...]
    gold: tuple[tuple[str, Certainty], ...]
    generated_nle: str
    reference_nles: tuple[str, ...]

    def __post_init__(self):
        if not self.reference_nles:
            raise ValueError(f"case {self.case_id}: reference_nles is empty")


@dataclass(frozen=True)
class EvalConfig:
    thresholds: ThresholdConfig = ThresholdConfig()
    k: int = 7
    style: str = "kg"
    strict: bool = True
    tokenizer_version: str = TOKENIZER_VERSION

    def fingerprint(self) -> str:
        payload = json.dumps({
            "theta_neg": self.thresholds.theta_neg,
            "theta_pos": self.thresholds.theta_pos,
            "labels": list(self.thresholds.labels),
            "k": self.k,
            "style": self.style,
            "filter_mode": "strict" if self.strict else "lenient",
            "tokenizer_version": self.tokenizer_version,
        }, sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class MetricReport:
    auc: Optional[float]
    bleu4: Optional[float]
    meteor: Optional[float]
    rouge_l: Optional[float]
    cider: Optional[float]
    n_total: int
    n_evaluated: int
    config_fingerprint: str
    filter_mode: str = "strict"
    auc_skipped_labels: tuple[str, ...] = ()
    empty_after_filter: bool = False

    def to_dict(self) -> dict:
        return {
            "auc": self.auc, "bleu4": self.bleu4, "meteor": self.meteor,
            "rouge_l": self.rouge_l, "cider": self.cider,
            "n_total": self.n_total, "n_evaluated": self.n_evaluated,
            "config_fingerprint": self.config_fingerprint,
            "filter_mode": self.filter_mode,
            "auc_skipped_labels": list(self.auc_skipped_labels),
            "empty_after_filter": self.empty_after_filter,
        }


def _case_matches(case: CaseRecord, strict: bool) -> bool:
    predicted = {p.label: p.certainty for p in case.predicted}
    if not case.gold:
        return True
    hits = sum(1 for label, cert in case.gold if predicted.get(label) == cert)
    return hits == len(case.gold) if strict else hits >= 1


def filter_correct(cases: Sequence[CaseRecord], strict: bool = True) -> list[CaseRecord]:
    """Keep a case iff its gold labels are predicted with matching
    certainty (all of them in strict mode, at least one in lenient)."""
    return [c for c in cases if _case_matches(c, strict)]


def _auc_over_all(cases: Sequence[CaseRecord],
                  cfg: EvalConfig) -> tuple[Optional[float], tuple[str, ...]]:
    labels = cfg.thresholds.labels
    if not labels:
        return None, ()
    score_cols, label_cols = [], []
    for label in labels:
        scores, golds = [], []
        for case in cases:
            pred = next((p for p in case.predicted if p.label == label), None)
            gold = next((g for g in case.gold if g[0] == label), None)
            if pred is None or gold is None:
                continue
            scores.append(pred.score)
            golds.append(1 if gold[1] == Certainty.positive else 0)
        score_cols.append(scores)
        label_cols.append(golds)
    mean, skipped = macro_auc(score_cols, label_cols)
    return mean, tuple(labels[i] for i in skipped)


def evaluate(cases: Sequence[CaseRecord], cfg: EvalConfig) -> MetricReport:
    """filter_correct then corpus metrics over survivors; macro AUC over
    all cases pre-filter. Zero survivors yields a report with absent
    metrics, never zeros."""
    if not cases:
        raise metrics.EmptyCorpus("no cases to evaluate")
    auc, skipped = _auc_over_all(cases, cfg)
    survivors = filter_correct(cases, cfg.strict)
    mode = "strict" if cfg.strict else "lenient"
    if not survivors:
        return MetricReport(auc, None, None, None, None, len(cases), 0,
                            cfg.fingerprint(), mode, skipped,
                            empty_after_filter=True)
    corpus = [make_pair(c.generated_nle, list(c.reference_nles), c.case_id)
              for c in survivors]
    return MetricReport(
        auc=auc,
        bleu4=metrics.bleu4(corpus),
        meteor=metrics.meteor_corpus(corpus),
        rouge_l=metrics.rouge_l_corpus(corpus),
        cider=metrics.cider_d(corpus),
        n_total=len(cases),
        n_evaluated=len(survivors),
        config_fingerprint=cfg.fingerprint(),
        filter_mode=mode,
        auc_skipped_labels=skipped,
    )


# --- pipeline runners -----------------------------------------------------

@dataclass(frozen=True)
class PipelineCase:
    """One retrieval+generation instance: a query embedding standing in for
    the image, its pathology predictions, gold labels and reference NLEs."""
    case_id: str
    query: EmbeddingVector
    predicted: tuple[PathologyPrediction, ...]
    gold: tuple[tuple[str, Certainty], ...]
    reference_nles: tuple[str, ...]


@dataclass
class PipelineConfig:
    records: list[TripletRecord]
    index: FlatIndex
    cases: list[PipelineCase]
    eval_config: EvalConfig = field(default_factory=EvalConfig)
    backend: GenerationBackend = field(default_factory=StubBackend)
    nle_texts: Optional[dict[int, str]] = None
    image_index: Optional[FlatIndex] = None
    image_triplets: Optional[dict[int, list[int]]] = None
    max_tokens: int = 256
    timeout_ms: int = 30_000


def _retrieve_uni_modal(config: PipelineConfig, case: PipelineCase,
                        k: int) -> list[RetrievalHit]:
    """Image-to-image lookup, then the matched image's own triplets."""
    if config.image_index is None or config.image_triplets is None:
        raise MissingImageIndex("uni-modal retrieval needs an image index "
                                "and an image->triplet map")
    nearest = top_k(config.image_index, case.query, 1)
    if not nearest:
        return []
    image_hit = nearest[0]
    triplet_ids = config.image_triplets.get(image_hit.id, [])
    return [RetrievalHit(tid, image_hit.score) for tid in triplet_ids[:k]]


def run_pipeline(config: PipelineConfig, k: Optional[int] = None,
                 mode: str = "cross_modal") -> list[CaseRecord]:
    """retrieve -> prompt -> generate for every case; deterministic with
    the stub backend."""
    k = config.eval_config.k if k is None else k
    style = config.eval_config.style
    out = []
    for position, case in enumerate(config.cases):
        if mode == "cross_modal":
            hits = top_k(config.index, case.query, k) if style != "none" else []
        elif mode == "uni_modal":
            hits = _retrieve_uni_modal(config, case, k) if style != "none" else []
        else:
            raise ValueError(f"unknown retrieval mode {mode!r}")
        phrase = render_pathology_phrase(case.predicted)
        question = select_template(position, phrase)
        bundle = assemble_prompt(question, hits, config.records, style,
                                 nle_texts=config.nle_texts, phrase=phrase)
        response = generate(config.backend,
                            GenerationRequest(bundle.rendered,
                                              max_tokens=config.max_tokens,
                                              timeout_ms=config.timeout_ms))
        out.append(CaseRecord(case.case_id, case.predicted, case.gold,
                              response.text, case.reference_nles))
    return out


def k_sweep(config: PipelineConfig,
            ks: Sequence[int] = (1, 3, 5, 7)) -> list[tuple[int, MetricReport | str]]:
    """One full pipeline run per K; a failing row carries its error message
    instead of aborting the sweep."""
    rows: list[tuple[int, MetricReport | str]] = []
    for k in ks:
        try:
            cfg = replace(config.eval_config, k=k)
            cases = run_pipeline(config, k=k)
            rows.append((k, evaluate(cases, cfg)))
        except Exception as exc:  # noqa: BLE001 - per-row isolation is the contract
            rows.append((k, f"error: {exc}"))
    return rows


def retrieval_mode_compare(config: PipelineConfig) -> list[tuple[str, MetricReport]]:
    """Two rows, uni-modal then cross-modal, same metric columns."""
    rows = []
    for mode in ("uni_modal", "cross_modal"):
        cases = run_pipeline(config, mode=mode)
        rows.append((mode, evaluate(cases, config.eval_config)))
    return rows


def load_cases(stream) -> list[CaseRecord]:
    """Read a JSON-lines cases file: {"case_id", "predicted": [{"label",
    "score", "certainty"}], "gold": [{"label", "certainty"}],
    "generated_nle", "reference_nles"}."""
    from .errors import MalformedRecord
    cases = []
    for line_no, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            raise MalformedRecord(line_no, "invalid JSON") from None
        try:
            predicted = tuple(
                PathologyPrediction(p["label"], float(p["score"]),
                                    Certainty[p["certainty"]])
                for p in obj.get("predicted", []))
            gold = tuple((g["label"], Certainty[g["certainty"]])
                         for g in obj.get("gold", []))
            cases.append(CaseRecord(obj["case_id"], predicted, gold,
                                    obj.get("generated_nle", ""),
                                    tuple(obj["reference_nles"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedRecord(line_no, f"bad case record: {exc}") from None
    return cases


def load_pipeline_cases(stream, embeddings: dict[int, EmbeddingVector]) -> list[PipelineCase]:
    """Read pipeline cases ({"case_id", "query_id", "predicted", "gold",
    "reference_nles"}) resolving query_id against a KGEB embedding set."""
    from .errors import MalformedRecord
    cases = []
    for line_no, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            raise MalformedRecord(line_no, "invalid JSON") from None
        try:
            query_id = int(obj["query_id"])
            if query_id not in embeddings:
                raise MalformedRecord(line_no,
                                      f"query_id {query_id} not in embeddings")
            predicted = tuple(
                PathologyPrediction(p["label"], float(p.get("score", 0.0)),
                                    Certainty[p["certainty"]])
                for p in obj.get("predicted", []))
            gold = tuple((g["label"], Certainty[g["certainty"]])
                         for g in obj.get("gold", []))
            cases.append(PipelineCase(obj["case_id"], embeddings[query_id],
                                      predicted, gold,
                                      tuple(obj["reference_nles"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedRecord(line_no, f"bad pipeline case: {exc}") from None
    return cases


def render_table(rows: Sequence[tuple[object, MetricReport | str]],
                 key_name: str = "K") -> str:
    """Aligned plain-text table with the ablation columns."""
    header = [key_name, *METRIC_COLUMNS]
    body = []
    for key, report in rows:
        if isinstance(report, str):
            body.append([str(key), report, "", "", ""])
            continue
        def fmt(v: Optional[float]) -> str:
            return "-" if v is None else f"{v:.4f}"
        body.append([str(key), fmt(report.bleu4), fmt(report.meteor),
                     fmt(report.rouge_l), fmt(report.cider)])
    widths = [max(len(row[i]) for row in [header, *body]) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
             for row in [header, *body]]
    return "\n".join(lines) + "\n"
