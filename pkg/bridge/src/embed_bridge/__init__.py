"""Embedding export bridge.

Runs pluggable text/image encoders over a KGDS triplet datastore or an
image directory and emits KGEB embedding files (plus a checksummed
manifest) for the retrieval engine to consume. Also generates synthetic
Gaussian-mixture KGEB fixtures for desk-scale testing. Talks to the
engine only through the on-disk file formats.
"""

from .encoders import (EncoderUnavailable, available_encoders, get_encoder)
from .formats import (KgdsRecord, read_datastore, sha256_file, write_kgeb)
from .manifest import BridgeManifest, write_manifest
from .pipeline import IdGap, embed_images, embed_triplets, synth_fixture

__version__ = "0.1.0"

__all__ = [
    "BridgeManifest", "EncoderUnavailable", "IdGap", "KgdsRecord",
    "available_encoders", "embed_images", "embed_triplets", "get_encoder",
    "read_datastore", "sha256_file", "synth_fixture", "write_kgeb",
    "write_manifest",
]
