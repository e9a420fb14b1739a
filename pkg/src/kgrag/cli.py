"""Command-line interface for the full pipeline.

Exit codes: 0 ok, 1 data error (bad inputs, schema violations), 2
internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections import Counter
from pathlib import Path

import numpy as np

from . import harness, kg_store, vector_index
from .config import EngineConfig, load_config
from .errors import ConfigError, IdMismatch, KgragError
from .harness import EvalConfig, PipelineConfig, render_table
from .prompts import HttpBackend, StubBackend
from .vector_index import EmbeddingVector

EXIT_OK = 0
EXIT_DATA = 1
EXIT_INTERNAL = 2


def _eval_config(cfg: EngineConfig) -> EvalConfig:
    return EvalConfig(thresholds=cfg.thresholds, k=cfg.k, style=cfg.style,
                      strict=cfg.strict)


def cmd_build(cfg: EngineConfig, args: argparse.Namespace) -> int:
    with open(args.triplets, "rb") as fh:
        triplets = kg_store.parse_export(fh)
    if args.relation:
        triplets = kg_store.filter_by_relation(triplets, args.relation)
    records = kg_store.build_datastore(triplets, dedup=args.dedup)
    with open(args.embeddings, "rb") as fh:
        vectors = vector_index.load_embeddings(fh)

    record_ids = {r.id for r in records}
    vector_ids = {v.id for v in vectors}
    if record_ids != vector_ids:
        missing = sorted(record_ids ^ vector_ids)[:10]
        raise IdMismatch(f"datastore/embedding id sets differ, e.g. {missing}")

    index = vector_index.build_flat(sorted(vectors, key=lambda v: v.id))
    datastore_path = Path(args.out_datastore or cfg.datastore_path or "datastore.kgds")
    index_path = Path(args.out_index or cfg.index_path or "index.kgix")
    with open(datastore_path, "w", encoding="utf-8") as fh:
        kg_store.save_datastore(records, fh)
    with open(index_path, "wb") as fh:
        vector_index.save_index(index, fh)

    text_counts = Counter(r.canonical_text for r in records)
    duplicates = sum(c - 1 for c in text_counts.values())
    print(f"datastore: {len(records)} records -> {datastore_path}")
    print(f"index: {len(index)} vectors, dim {index.dim} -> {index_path}")
    print(f"duplicate canonical texts: {duplicates} "
          f"({len(text_counts)} distinct)")
    return EXIT_OK


def _load_engine(cfg: EngineConfig):
    cfg.validate(require_paths=("datastore", "index"))
    with open(cfg.datastore_path, encoding="utf-8") as fh:
        records = kg_store.load_datastore(fh)
    with open(cfg.index_path, "rb") as fh:
        index = vector_index.load_index(fh)
    return records, index


def _query_vector(args: argparse.Namespace) -> EmbeddingVector:
    if args.vector:
        values = np.array([float(x) for x in args.vector.split(",")],
                          dtype=np.float32)
        return EmbeddingVector(0, values)
    with open(args.query_embedding, "rb") as fh:
        vectors = vector_index.load_embeddings(fh)
    if not vectors:
        raise ConfigError("query embedding file is empty")
    return vectors[0]


def cmd_query(cfg: EngineConfig, args: argparse.Namespace) -> int:
    records, index = _load_engine(cfg)
    texts = {r.id: r.canonical_text for r in records}
    query = _query_vector(args)
    if isinstance(index, vector_index.IvfIndex):
        hits = vector_index.search_ivf(index, query, cfg.k)
    else:
        hits = vector_index.top_k(index, query, cfg.k)
    for rank, hit in enumerate(hits, start=1):
        print(f"{rank}\t{hit.id}\t{hit.score:.6f}\t{texts.get(hit.id, '')}")
    return EXIT_OK


def _write_reports(rows, key_name: str, out_prefix: str | None) -> None:
    payload = [{key_name.lower(): key,
                "report": (r.to_dict() if not isinstance(r, str) else r)}
               for key, r in rows]
    table = render_table(rows, key_name)
    if out_prefix:
        Path(f"{out_prefix}.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        Path(f"{out_prefix}.txt").write_text(table, encoding="utf-8")
        print(f"wrote {out_prefix}.json and {out_prefix}.txt")
    else:
        print(json.dumps(payload, indent=2, sort_keys=True))
        print(table, end="")


def cmd_evaluate(cfg: EngineConfig, args: argparse.Namespace) -> int:
    with open(args.cases, encoding="utf-8") as fh:
        cases = harness.load_cases(fh)
    if not cases:
        print("EmptyCorpus: no cases in input", file=sys.stderr)
        return EXIT_DATA
    report = harness.evaluate(cases, _eval_config(cfg))
    def fmt(v):
        return "-" if v is None else f"{v:.4f}"
    table = ("AUC     B4      MET.    R.L.    CIDEr\n"
             f"{fmt(report.auc)}  {fmt(report.bleu4)}  {fmt(report.meteor)}  "
             f"{fmt(report.rouge_l)}  {fmt(report.cider)}\n")
    if args.out:
        Path(f"{args.out}.json").write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8")
        Path(f"{args.out}.txt").write_text(table, encoding="utf-8")
        print(f"wrote {args.out}.json and {args.out}.txt")
    else:
        print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
        print(table, end="")
    return EXIT_OK


def _pipeline_config(cfg: EngineConfig, args: argparse.Namespace) -> PipelineConfig:
    records, index = _load_engine(cfg)
    if isinstance(index, vector_index.IvfIndex):
        index = vector_index.flatten_ivf(index)
    with open(args.query_embeddings, "rb") as fh:
        embeddings = {v.id: v for v in vector_index.load_embeddings(fh)}
    with open(args.cases, encoding="utf-8") as fh:
        cases = harness.load_pipeline_cases(fh, embeddings)
    if not cases:
        raise ConfigError("no cases in input")
    backend = (HttpBackend(cfg.backend_url) if args.real_backend
               else StubBackend())
    if args.real_backend and not cfg.backend_url:
        raise ConfigError("--real-backend needs backend.url in the config")
    return PipelineConfig(records=records, index=index, cases=cases,
                          eval_config=_eval_config(cfg), backend=backend,
                          timeout_ms=cfg.backend_timeout_ms)


def cmd_sweep(cfg: EngineConfig, args: argparse.Namespace) -> int:
    pipeline = _pipeline_config(cfg, args)
    ks = [int(x) for x in args.ks.split(",")] if args.ks else [1, 3, 5, 7]
    rows = harness.k_sweep(pipeline, ks)
    _write_reports(rows, "K", args.out)
    return EXIT_OK


def cmd_compare(cfg: EngineConfig, args: argparse.Namespace) -> int:
    pipeline = _pipeline_config(cfg, args)
    if args.image_embeddings:
        with open(args.image_embeddings, "rb") as fh:
            image_vectors = vector_index.load_embeddings(fh)
        pipeline.image_index = vector_index.build_flat(image_vectors)
        raw = json.loads(Path(args.image_triplets).read_text(encoding="utf-8"))
        pipeline.image_triplets = {int(k): v for k, v in raw.items()}
    rows = harness.retrieval_mode_compare(pipeline)
    _write_reports(rows, "Mode", args.out)
    return EXIT_OK


def cmd_serve(cfg: EngineConfig, args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app
    records, index = _load_engine(cfg)
    app = create_app(index, records, default_k=cfg.k)
    uvicorn.run(app, host=cfg.service_host, port=cfg.service_port,
                log_level=cfg.log_level)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kgrag")
    parser.add_argument("--config", help="TOML config path "
                        "(falls back to $KGRAG_CONFIG)")
    parser.add_argument("--k", type=int, help="retrieval depth override")
    parser.add_argument("--style", choices=["kg", "nle", "none"])
    mode = parser.add_mutually_exclusive_group()
    mode.add_argument("--strict", action="store_true", default=None,
                      help="strict correct-prediction filter (default)")
    mode.add_argument("--lenient", action="store_true", default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build the datastore and flat index")
    p.add_argument("--triplets", required=True, help="JSON-lines triplet export")
    p.add_argument("--embeddings", required=True, help="KGEB triplet embeddings")
    p.add_argument("--relation", help="keep only this relation (exact match)")
    p.add_argument("--dedup", action="store_true")
    p.add_argument("--out-datastore")
    p.add_argument("--out-index")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("query", help="run one top-k query")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--query-embedding", help="KGEB file; first vector is used")
    src.add_argument("--vector", help="inline comma-separated floats")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("evaluate", help="score a cases file")
    p.add_argument("--cases", required=True)
    p.add_argument("--out", help="output path prefix (.json/.txt)")
    p.set_defaults(func=cmd_evaluate)

    for name, func in (("sweep", cmd_sweep), ("compare", cmd_compare)):
        p = sub.add_parser(name)
        p.add_argument("--cases", required=True, help="pipeline cases JSON-lines")
        p.add_argument("--query-embeddings", required=True, help="KGEB file")
        p.add_argument("--out", help="output path prefix (.json/.txt)")
        p.add_argument("--real-backend", action="store_true",
                       help="use the configured HTTP backend instead of the stub")
        if name == "sweep":
            p.add_argument("--ks", help="comma-separated K values (default 1,3,5,7)")
        else:
            p.add_argument("--image-embeddings", help="KGEB image index for uni-modal")
            p.add_argument("--image-triplets",
                           help="JSON map image id -> triplet record ids")
        p.set_defaults(func=func)

    p = sub.add_parser("serve", help="run the retrieval HTTP service")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.k is not None:
            cfg.k = args.k
        if args.style is not None:
            cfg.style = args.style
        if args.strict:
            cfg.strict = True
        if args.lenient:
            cfg.strict = False
        cfg.validate()
        return args.func(cfg, args)
    except (KgragError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
