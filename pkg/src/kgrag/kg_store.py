"""Triplet datastore: parsing RadGraph-style exports, relation filtering,
canonical rendering and record construction.

The datastore is immutable after build_datastore; all functions here are
pure over their inputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Iterable, Union

from .errors import EmptyField, MalformedRecord

_FORBIDDEN = (";", "\n")


@dataclass(frozen=True)
class Triplet:
    subject: str
    relation: str
    object: str
    source_id: str = ""

    def __post_init__(self):
        if not self.subject:
            raise EmptyField(0, "subject is empty")
        if not self.object:
            raise EmptyField(0, "object is empty")
        for name, value in (("subject", self.subject),
                            ("relation", self.relation),
                            ("object", self.object)):
            for ch in _FORBIDDEN:
                if ch in value:
                    raise MalformedRecord(0, f"{name} contains forbidden {ch!r}")


@dataclass(frozen=True)
class TripletRecord:
    id: int
    triplet: Triplet
    canonical_text: str


def canonical_text(triplet: Triplet) -> str:
    """Deterministic single-space rendering, e.g. 'opacity suggestive_of pneumonia'."""
    return f"{triplet.subject} {triplet.relation} {triplet.object}"


def parse_export(stream: Union[IO[bytes], IO[str], Iterable[bytes], Iterable[str]]) -> list[Triplet]:
    """Parse a JSON-lines triplet export.

    Each line is {"subject": str, "relation": str, "object": str,
    "source_id": str}; unknown keys are ignored, blank lines skipped.
    Raises MalformedRecord/EmptyField with 1-based line numbers instead of
    silently dropping bad lines.
    """
    triplets = []
    for line_no, raw in enumerate(stream, start=1):
        if isinstance(raw, bytes):
            try:
                raw = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise MalformedRecord(line_no, f"invalid UTF-8: {exc}") from None
        line = raw.strip("\r\n")
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(line_no, f"invalid JSON: {exc.msg}") from None
        if not isinstance(obj, dict):
            raise MalformedRecord(line_no, "record is not a JSON object")
        for key in ("subject", "relation", "object"):
            if key not in obj:
                raise MalformedRecord(line_no, f"missing key {key!r}")
            if not isinstance(obj[key], str):
                raise MalformedRecord(line_no, f"key {key!r} is not a string")
        if not obj["subject"].strip():
            raise EmptyField(line_no, "subject is blank")
        if not obj["object"].strip():
            raise EmptyField(line_no, "object is blank")
        source_id = obj.get("source_id", "")
        if not isinstance(source_id, str):
            raise MalformedRecord(line_no, "source_id is not a string")
        try:
            triplets.append(Triplet(obj["subject"], obj["relation"],
                                    obj["object"], source_id))
        except MalformedRecord as exc:
            raise MalformedRecord(line_no, exc.reason) from None
    return triplets


def filter_by_relation(triplets: list[Triplet], relation: str) -> list[Triplet]:
    """Order-preserving subset with an exact, case-sensitive relation match."""
    return [t for t in triplets if t.relation == relation]


def build_datastore(triplets: list[Triplet], dedup: bool = False) -> list[TripletRecord]:
    """Assign dense ids 0..n-1 in input order.

    dedup=True keeps the first occurrence of each canonical text; duplicates
    are retained by default since duplicate density is part of the
    datastore's empirical distribution.
    """
    records = []
    seen: set[str] = set()
    for t in triplets:
        text = canonical_text(t)
        if dedup:
            if text in seen:
                continue
            seen.add(text)
        records.append(TripletRecord(id=len(records), triplet=t, canonical_text=text))
    return records


def save_datastore(records: list[TripletRecord], sink: IO[str]) -> None:
    """Write KGDS JSON-lines: a header line followed by one record per line."""
    sink.write(json.dumps({"format": "KGDS", "version": 1, "count": len(records)}) + "\n")
    for rec in records:
        sink.write(json.dumps({
            "id": rec.id,
            "subject": rec.triplet.subject,
            "relation": rec.triplet.relation,
            "object": rec.triplet.object,
            "source_id": rec.triplet.source_id,
            "canonical_text": rec.canonical_text,
        }, ensure_ascii=False) + "\n")


def load_datastore(source: IO[str]) -> list[TripletRecord]:
    lines = iter(enumerate(source, start=1))
    try:
        _, header_line = next(lines)
    except StopIteration:
        raise MalformedRecord(1, "missing KGDS header") from None
    try:
        header = json.loads(header_line)
    except json.JSONDecodeError:
        raise MalformedRecord(1, "header is not valid JSON") from None
    if not isinstance(header, dict) or header.get("format") != "KGDS":
        raise MalformedRecord(1, "not a KGDS file")
    if header.get("version") != 1:
        raise MalformedRecord(1, f"unsupported KGDS version {header.get('version')!r}")
    count = header.get("count")

    records = []
    for line_no, line in lines:
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            raise MalformedRecord(line_no, "record is not valid JSON") from None
        try:
            triplet = Triplet(obj["subject"], obj["relation"], obj["object"],
                              obj.get("source_id", ""))
        except (KeyError, TypeError):
            raise MalformedRecord(line_no, "record missing triplet fields") from None
        rec = TripletRecord(id=int(obj["id"]), triplet=triplet,
                            canonical_text=obj.get("canonical_text", canonical_text(triplet)))
        if rec.canonical_text != canonical_text(triplet):
            raise MalformedRecord(line_no, "canonical_text does not match fields")
        if rec.id != len(records):
            raise MalformedRecord(line_no, f"non-dense id {rec.id}, expected {len(records)}")
        records.append(rec)
    if count is not None and count != len(records):
        raise MalformedRecord(1, f"header count {count} != {len(records)} records")
    return records
