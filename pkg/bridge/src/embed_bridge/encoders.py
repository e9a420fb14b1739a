"""Encoder registry.

Real deployments would register CLIP-class medical image/text encoders
here; this package ships a deterministic hash-seeded encoder so exports
are reproducible without model weights. An encoder maps a string (a
triplet's canonical text, or an image file's bytes digest) to a unit
vector of a fixed dimension.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np


class EncoderUnavailable(KeyError):
    pass


class Encoder(Protocol):
    name: str
    version: str
    dim: int

    def encode_text(self, text: str) -> np.ndarray: ...

    def encode_bytes(self, payload: bytes) -> np.ndarray: ...


@dataclass(frozen=True)
class HashedEncoder:
    """Text -> unit vector via a SHA-256-seeded Gaussian draw. Stateless
    and fully deterministic: the same input always yields the same
    vector, across processes and platforms."""

    name: str
    version: str
    dim: int

    def _draw(self, digest: bytes) -> np.ndarray:
        seed = int.from_bytes(digest[:8], "little")
        values = np.random.default_rng(seed).standard_normal(self.dim)
        values /= np.linalg.norm(values)
        return values.astype("<f4")

    def encode_text(self, text: str) -> np.ndarray:
        return self._draw(hashlib.sha256(text.encode("utf-8")).digest())

    def encode_bytes(self, payload: bytes) -> np.ndarray:
        return self._draw(hashlib.sha256(payload).digest())


_REGISTRY: dict[str, Callable[[], Encoder]] = {
    "hashed-128": lambda: HashedEncoder("hashed", "1", 128),
    "hashed-256": lambda: HashedEncoder("hashed", "1", 256),
    "hashed-16": lambda: HashedEncoder("hashed", "1", 16),
}


def available_encoders() -> list[str]:
    return sorted(_REGISTRY)


def get_encoder(encoder_id: str) -> Encoder:
    try:
        return _REGISTRY[encoder_id]()
    except KeyError:
        raise EncoderUnavailable(
            f"unknown encoder {encoder_id!r}; available: "
            f"{', '.join(available_encoders())}") from None
