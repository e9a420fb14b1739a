"""Export manifest: what was encoded, with what, into which file, and the
checksum proving the file is the one the manifest describes."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

from .formats import atomic_write_bytes, sha256_file


@dataclass(frozen=True)
class BridgeManifest:
    encoder: str
    encoder_version: str
    input_listing: tuple[str, ...]
    output_path: str
    dim: int
    count: int
    sha256: str

    def verify(self) -> None:
        actual = sha256_file(self.output_path)
        if actual != self.sha256:
            raise ValueError(f"{self.output_path}: checksum mismatch "
                             f"(manifest {self.sha256}, file {actual})")


def write_manifest(manifest: BridgeManifest, path: Path | str) -> None:
    payload = json.dumps(asdict(manifest), indent=2, sort_keys=True) + "\n"
    atomic_write_bytes(path, iter([payload.encode("utf-8")]))


def read_manifest(path: Path | str) -> BridgeManifest:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    obj["input_listing"] = tuple(obj["input_listing"])
    return BridgeManifest(**obj)
