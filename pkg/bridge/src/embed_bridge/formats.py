"""On-disk formats shared with the retrieval engine.

KGEB (binary, little-endian): magic "KGEB", u16 version=1, u32 dim,
u64 count, then per record u64 id + dim float32 values.

KGDS (JSON lines): a header object {"format": "KGDS", "version": 1,
"count": n} followed by one record object per line with at least "id"
and "canonical_text" fields.

These are written/parsed independently here; the engine is consumed
only through the files themselves.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

KGEB_MAGIC = b"KGEB"
KGEB_VERSION = 1


@dataclass(frozen=True)
class KgdsRecord:
    id: int
    canonical_text: str


class FormatError(ValueError):
    pass


def read_datastore(path: Path | str) -> list[KgdsRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        header_line = fh.readline()
        if not header_line:
            raise FormatError(f"{path}: empty file, missing KGDS header")
        header = json.loads(header_line)
        if header.get("format") != "KGDS" or header.get("version") != 1:
            raise FormatError(f"{path}: not a KGDS version 1 file")
        for line_no, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            obj = json.loads(line)
            try:
                records.append(KgdsRecord(int(obj["id"]),
                                          str(obj["canonical_text"])))
            except KeyError as exc:
                raise FormatError(f"{path}:{line_no}: missing {exc}") from None
    if len(records) != header.get("count"):
        raise FormatError(f"{path}: header count {header.get('count')} != "
                          f"{len(records)} records")
    return records


def atomic_write_bytes(path: Path | str, chunks: Iterator[bytes]) -> None:
    """Write to a temp file in the target directory, then rename into
    place, so a crash never leaves a half-written artifact."""
    path = Path(path)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            for chunk in chunks:
                fh.write(chunk)
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except FileNotFoundError:
            pass
        raise


def write_kgeb(path: Path | str, ids: Sequence[int],
               matrix: np.ndarray) -> None:
    matrix = np.asarray(matrix, dtype="<f4")
    if matrix.ndim != 2 or len(ids) != matrix.shape[0]:
        raise FormatError("ids and matrix rows must correspond")
    dim = matrix.shape[1]

    def chunks():
        yield KGEB_MAGIC
        yield struct.pack("<HIQ", KGEB_VERSION, dim, len(ids))
        for ident, row in zip(ids, matrix):
            yield struct.pack("<Q", int(ident))
            yield row.tobytes()

    atomic_write_bytes(path, chunks())


def sha256_file(path: Path | str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()
