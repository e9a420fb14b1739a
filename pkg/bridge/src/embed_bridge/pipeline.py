"""Export operations: datastore -> KGEB, image directory -> KGEB, and
synthetic Gaussian-mixture fixtures."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .encoders import get_encoder
from .formats import (KgdsRecord, atomic_write_bytes, read_datastore,
                      sha256_file, write_kgeb)
from .manifest import BridgeManifest, write_manifest

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".dcm", ".bin")


class IdGap(ValueError):
    pass


def _check_dense_ids(records: list[KgdsRecord]) -> None:
    ids = [r.id for r in records]
    if ids != list(range(len(ids))):
        raise IdGap(f"datastore ids must be exactly 0..{len(ids) - 1}")


def _emit(path: Path, ids, matrix, encoder, listing) -> BridgeManifest:
    write_kgeb(path, ids, matrix)
    manifest = BridgeManifest(
        encoder=encoder.name, encoder_version=encoder.version,
        input_listing=tuple(listing), output_path=str(path),
        dim=encoder.dim, count=len(ids), sha256=sha256_file(path))
    write_manifest(manifest, path.with_suffix(path.suffix + ".manifest.json"))
    return manifest


def embed_triplets(datastore_path: Path | str, encoder_id: str,
                   out_path: Path | str) -> BridgeManifest:
    """One vector per datastore record, id-aligned; each record's
    canonical text is the exact encoder input."""
    out_path = Path(out_path)
    encoder = get_encoder(encoder_id)
    records = read_datastore(datastore_path)
    _check_dense_ids(records)
    matrix = np.empty((len(records), encoder.dim), dtype="<f4")
    for i, record in enumerate(records):
        matrix[i] = encoder.encode_text(record.canonical_text)
    return _emit(out_path, [r.id for r in records], matrix, encoder,
                 [str(datastore_path)])


def embed_images(image_dir: Path | str, encoder_id: str,
                 out_path: Path | str) -> BridgeManifest:
    """Ids assigned by sorted filename; a sidecar JSON maps name -> id."""
    out_path = Path(out_path)
    encoder = get_encoder(encoder_id)
    files = sorted(p for p in Path(image_dir).iterdir()
                   if p.suffix.lower() in IMAGE_SUFFIXES)
    matrix = np.empty((len(files), encoder.dim), dtype="<f4")
    for i, file in enumerate(files):
        matrix[i] = encoder.encode_bytes(file.read_bytes())
    name_map = {file.name: i for i, file in enumerate(files)}
    sidecar = json.dumps(name_map, indent=2, sort_keys=True) + "\n"
    atomic_write_bytes(out_path.with_suffix(out_path.suffix + ".names.json"),
                       iter([sidecar.encode("utf-8")]))
    return _emit(out_path, list(range(len(files))), matrix, encoder,
                 [str(f) for f in files])


def synth_fixture(out_path: Path | str, seed: int = 42, n: int = 1000,
                  dim: int = 128, n_clusters: int = 8) -> str:
    """Seeded Gaussian-mixture unit vectors; byte-reproducible for a given
    (seed, n, dim, n_clusters). Returns the file's sha256."""
    if n_clusters < 1 or (n and n < n_clusters):
        raise ValueError("need n >= n_clusters >= 1")
    out_path = Path(out_path)
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((n_clusters, dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    matrix = np.empty((n, dim), dtype="<f4")
    for i in range(n):
        row = centers[i % n_clusters] + 0.15 * rng.standard_normal(dim)
        matrix[i] = (row / np.linalg.norm(row)).astype("<f4")
    write_kgeb(out_path, list(range(n)), matrix)
    return sha256_file(out_path)
