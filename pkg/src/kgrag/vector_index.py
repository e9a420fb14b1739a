"""Cosine top-k retrieval over normalized embedding vectors.

Vectors are stored unit-normalized in float32 so a plain inner product
equals the cosine similarity; score computation runs in float64 over the
stored float32 values. Ties are broken by ascending id, which makes every
search result a total order and k=a a prefix of k=b for a <= b.

Binary formats (all little-endian):
  KGEB embedding file:  magic "KGEB", u16 version=1, u32 dim, u64 count,
                        then per record u64 id + dim * f32.
  KGIX index file:      magic "KGIX", u16 version=1, u8 kind (0=flat,
                        1=IVF), u32 dim, u64 count, then the kind payload.
                        Flat payload: per entry u64 id + dim * f32.
                        IVF payload: u32 n_lists, u32 n_probe, n_lists *
                        dim * f32 centroids, n_lists * u64 list lengths,
                        then the concatenated per-list entries.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np

from .errors import (CorruptIndex, DimensionMismatch, DuplicateId,
                     InsufficientVectors, ZeroVector)

NORM_EPSILON = 1e-6
_ZERO_FLOOR = 1e-12

KGEB_MAGIC = b"KGEB"
KGIX_MAGIC = b"KGIX"


@dataclass(frozen=True)
class EmbeddingVector:
    id: int
    values: np.ndarray  # float32, shape (dim,)

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float32)
        if arr.ndim != 1 or arr.size < 1:
            raise DimensionMismatch(f"vector {self.id}: expected 1-d array with dim >= 1")
        if not np.all(np.isfinite(arr)):
            raise ZeroVector(f"vector {self.id}: non-finite values")
        object.__setattr__(self, "values", arr)

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class RetrievalHit:
    id: int
    score: float


def _normalize(values: np.ndarray, epsilon: float = NORM_EPSILON) -> np.ndarray:
    """Unit-normalize a float32 vector; a no-op when already within epsilon
    of unit norm, so normalization is byte-idempotent."""
    norm = float(np.linalg.norm(values.astype(np.float64)))
    if norm < _ZERO_FLOOR:
        raise ZeroVector("zero vector has no direction")
    if abs(norm - 1.0) <= epsilon:
        return values
    return (values.astype(np.float64) / norm).astype(np.float32)


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """cos(a, b) = (a.b)/(|a||b|), clamped to [-1, 1] against rounding."""
    if a.dim != b.dim:
        raise DimensionMismatch(f"dim {a.dim} != {b.dim}")
    av = a.values.astype(np.float64)
    bv = b.values.astype(np.float64)
    na = np.linalg.norm(av)
    nb = np.linalg.norm(bv)
    if na < _ZERO_FLOOR or nb < _ZERO_FLOOR:
        raise ZeroVector("cosine undefined for zero vectors")
    return float(np.clip(np.dot(av, bv) / (na * nb), -1.0, 1.0))


class FlatIndex:
    """Exact cosine top-k over an immutable set of normalized vectors."""

    def __init__(self, dim: int, norm_epsilon: float = NORM_EPSILON):
        if dim < 1:
            raise DimensionMismatch("dim must be >= 1")
        self.dim = dim
        self.norm_epsilon = norm_epsilon
        self.ids = np.empty(0, dtype=np.uint64)
        self.matrix = np.empty((0, dim), dtype=np.float32)
        self._matrix64 = np.empty((0, dim), dtype=np.float64)

    def __len__(self) -> int:
        return int(self.ids.shape[0])

    def _finalize(self, ids: np.ndarray, matrix: np.ndarray) -> "FlatIndex":
        self.ids = ids
        self.matrix = matrix
        self._matrix64 = matrix.astype(np.float64)
        return self


def build_flat(vectors: Sequence[EmbeddingVector], dim: int | None = None,
               norm_epsilon: float = NORM_EPSILON) -> FlatIndex:
    """Build an exact index; insertion order is preserved, ids must be unique."""
    if not vectors:
        if dim is None:
            raise DimensionMismatch("empty index needs an explicit dim")
        return FlatIndex(dim, norm_epsilon)
    d = vectors[0].dim if dim is None else dim
    ids = np.empty(len(vectors), dtype=np.uint64)
    matrix = np.empty((len(vectors), d), dtype=np.float32)
    seen: set[int] = set()
    for i, vec in enumerate(vectors):
        if vec.dim != d:
            raise DimensionMismatch(f"vector {vec.id}: dim {vec.dim} != {d}")
        if vec.id in seen:
            raise DuplicateId(f"id {vec.id} appears twice")
        if vec.id < 0:
            raise DuplicateId(f"id {vec.id} is negative")
        seen.add(vec.id)
        ids[i] = vec.id
        matrix[i] = _normalize(vec.values, norm_epsilon)
    return FlatIndex(d, norm_epsilon)._finalize(ids, matrix)


def _prepare_query(query: EmbeddingVector, dim: int) -> np.ndarray:
    if query.dim != dim:
        raise DimensionMismatch(f"query dim {query.dim} != index dim {dim}")
    q = query.values.astype(np.float64)
    norm = np.linalg.norm(q)
    if norm < _ZERO_FLOOR:
        raise ZeroVector("zero query vector")
    return q / norm


def _rank(ids: np.ndarray, scores: np.ndarray, k: int) -> list[RetrievalHit]:
    k = min(k, ids.shape[0])
    if k <= 0:
        return []
    # sort by score descending, then id ascending
    order = np.lexsort((ids, -scores))[:k]
    clipped = np.clip(scores[order], -1.0, 1.0)
    return [RetrievalHit(int(ids[i]), float(s)) for i, s in zip(order, clipped)]


def top_k(index: FlatIndex, query: EmbeddingVector, k: int) -> list[RetrievalHit]:
    """Exact search: min(k, n) hits, score descending, ties by ascending id."""
    if len(index) == 0 or k <= 0:
        if k < 0:
            raise ValueError("k must be >= 0")
        _prepare_query(query, index.dim)
        return []
    q = _prepare_query(query, index.dim)
    scores = index._matrix64 @ q
    return _rank(index.ids, scores, k)


class IvfIndex:
    """Inverted-file index: vectors partitioned by nearest centroid; queries
    probe only the n_probe closest lists."""

    def __init__(self, dim: int, centroids: np.ndarray,
                 list_ids: list[np.ndarray], list_matrices: list[np.ndarray],
                 n_probe: int = 1, norm_epsilon: float = NORM_EPSILON):
        self.dim = dim
        self.centroids = centroids  # float32 (n_lists, dim), unit rows
        self.list_ids = list_ids
        self.list_matrices = list_matrices
        self._list_matrices64 = [m.astype(np.float64) for m in list_matrices]
        self.n_probe = n_probe
        self.norm_epsilon = norm_epsilon

    @property
    def n_lists(self) -> int:
        return int(self.centroids.shape[0])

    def __len__(self) -> int:
        return sum(int(ids.shape[0]) for ids in self.list_ids)


def _spherical_kmeans(matrix: np.ndarray, n_lists: int, seed: int,
                      max_iter: int = 25) -> tuple[np.ndarray, np.ndarray]:
    """Seeded k-means on the unit sphere; centroids renormalized each step.
    Returns (centroids float64 unit rows, assignment)."""
    n = matrix.shape[0]
    rng = np.random.default_rng(seed)
    pick = rng.choice(n, size=n_lists, replace=False)
    centroids = matrix[pick].astype(np.float64).copy()
    assign = np.full(n, -1, dtype=np.int64)
    mat64 = matrix.astype(np.float64)
    for _ in range(max_iter):
        sims = mat64 @ centroids.T
        new_assign = np.argmax(sims, axis=1)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(n_lists):
            members = mat64[assign == c]
            if members.shape[0] == 0:
                continue  # empty cluster keeps its previous centroid
            mean = members.mean(axis=0)
            norm = np.linalg.norm(mean)
            if norm > _ZERO_FLOOR:
                centroids[c] = mean / norm
    sims = mat64 @ centroids.T
    assign = np.argmax(sims, axis=1)
    return centroids, assign


def build_ivf(vectors: Sequence[EmbeddingVector], n_lists: int, seed: int = 0,
              n_probe: int = 1, norm_epsilon: float = NORM_EPSILON) -> IvfIndex:
    if n_lists < 1:
        raise InsufficientVectors("n_lists must be >= 1")
    if len(vectors) < n_lists:
        raise InsufficientVectors(f"{len(vectors)} vectors < n_lists {n_lists}")
    flat = build_flat(vectors, norm_epsilon=norm_epsilon)
    centroids, assign = _spherical_kmeans(flat.matrix, n_lists, seed)
    list_ids, list_matrices = [], []
    for c in range(n_lists):
        mask = assign == c
        list_ids.append(flat.ids[mask].copy())
        list_matrices.append(flat.matrix[mask].copy())
    return IvfIndex(flat.dim, centroids.astype(np.float32), list_ids,
                    list_matrices, n_probe=min(n_probe, n_lists),
                    norm_epsilon=norm_epsilon)


def search_ivf(index: IvfIndex, query: EmbeddingVector, k: int,
               n_probe: int | None = None) -> list[RetrievalHit]:
    """Exact search restricted to the n_probe lists with nearest centroids."""
    n_probe = index.n_probe if n_probe is None else n_probe
    if not 1 <= n_probe <= index.n_lists:
        raise ValueError(f"n_probe {n_probe} outside 1..{index.n_lists}")
    q = _prepare_query(query, index.dim)
    if k <= 0:
        if k < 0:
            raise ValueError("k must be >= 0")
        return []
    centroid_scores = index.centroids.astype(np.float64) @ q
    probe = np.argsort(-centroid_scores, kind="stable")[:n_probe]
    id_parts = [index.list_ids[c] for c in probe if index.list_ids[c].size]
    if not id_parts:
        return []
    ids = np.concatenate(id_parts)
    scores = np.concatenate([index._list_matrices64[c] @ q
                             for c in probe if index.list_ids[c].size])
    return _rank(ids, scores, k)


def flatten_ivf(index: IvfIndex) -> FlatIndex:
    """View the IVF entry set as a flat index (used by oracles and persistence)."""
    flat = FlatIndex(index.dim, index.norm_epsilon)
    if len(index) == 0:
        return flat
    ids = np.concatenate([i for i in index.list_ids])
    matrix = np.concatenate([m for m in index.list_matrices])
    order = np.argsort(ids, kind="stable")
    return flat._finalize(ids[order], matrix[order])


# --- binary persistence -------------------------------------------------

def _read_exact(source: IO[bytes], n: int, what: str) -> bytes:
    data = source.read(n)
    if len(data) != n:
        raise CorruptIndex(f"truncated while reading {what} "
                           f"(wanted {n} bytes, got {len(data)})",
                           offset=source.tell() - len(data))
    return data


def save_embeddings(vectors: Sequence[EmbeddingVector], sink: IO[bytes]) -> None:
    """Write a KGEB embedding file (vectors stored as given, not normalized)."""
    dim = vectors[0].dim if vectors else 0
    sink.write(KGEB_MAGIC)
    sink.write(struct.pack("<HIQ", 1, dim, len(vectors)))
    for vec in vectors:
        if vec.dim != dim:
            raise DimensionMismatch(f"vector {vec.id}: dim {vec.dim} != {dim}")
        sink.write(struct.pack("<Q", vec.id))
        sink.write(vec.values.astype("<f4").tobytes())


def load_embeddings(source: IO[bytes]) -> list[EmbeddingVector]:
    magic = _read_exact(source, 4, "magic")
    if magic != KGEB_MAGIC:
        raise CorruptIndex(f"bad magic {magic!r}, expected {KGEB_MAGIC!r}", offset=0)
    version, dim, count = struct.unpack("<HIQ", _read_exact(source, 14, "header"))
    if version != 1:
        raise CorruptIndex(f"unsupported KGEB version {version}", offset=4)
    vectors = []
    for i in range(count):
        (vid,) = struct.unpack("<Q", _read_exact(source, 8, f"record {i} id"))
        raw = _read_exact(source, 4 * dim, f"record {i} values")
        values = np.frombuffer(raw, dtype="<f4").copy()
        vectors.append(EmbeddingVector(vid, values))
    trailing = source.read(1)
    if trailing:
        raise CorruptIndex("trailing bytes after last record", offset=source.tell() - 1)
    return vectors


def save_index(index: FlatIndex | IvfIndex, sink: IO[bytes]) -> None:
    sink.write(KGIX_MAGIC)
    if isinstance(index, FlatIndex):
        sink.write(struct.pack("<HBIQ", 1, 0, index.dim, len(index)))
        for i in range(len(index)):
            sink.write(struct.pack("<Q", int(index.ids[i])))
            sink.write(index.matrix[i].astype("<f4").tobytes())
    elif isinstance(index, IvfIndex):
        sink.write(struct.pack("<HBIQ", 1, 1, index.dim, len(index)))
        sink.write(struct.pack("<II", index.n_lists, index.n_probe))
        sink.write(index.centroids.astype("<f4").tobytes())
        for ids in index.list_ids:
            sink.write(struct.pack("<Q", ids.shape[0]))
        for ids, matrix in zip(index.list_ids, index.list_matrices):
            for j in range(ids.shape[0]):
                sink.write(struct.pack("<Q", int(ids[j])))
                sink.write(matrix[j].astype("<f4").tobytes())
    else:
        raise TypeError(f"unknown index type {type(index)!r}")


def load_index(source: IO[bytes]) -> FlatIndex | IvfIndex:
    magic = _read_exact(source, 4, "magic")
    if magic != KGIX_MAGIC:
        raise CorruptIndex(f"bad magic {magic!r}, expected {KGIX_MAGIC!r}", offset=0)
    version, kind, dim, count = struct.unpack("<HBIQ", _read_exact(source, 15, "header"))
    if version != 1:
        raise CorruptIndex(f"unsupported KGIX version {version}", offset=4)
    if dim < 1:
        raise CorruptIndex(f"invalid dim {dim}", offset=7)

    def read_entries(n: int, what: str) -> tuple[np.ndarray, np.ndarray]:
        ids = np.empty(n, dtype=np.uint64)
        matrix = np.empty((n, dim), dtype=np.float32)
        for i in range(n):
            (ids[i],) = struct.unpack("<Q", _read_exact(source, 8, f"{what} entry {i} id"))
            raw = _read_exact(source, 4 * dim, f"{what} entry {i} values")
            matrix[i] = np.frombuffer(raw, dtype="<f4")
        return ids, matrix

    if kind == 0:
        ids, matrix = read_entries(count, "flat")
        if len(set(ids.tolist())) != count:
            raise CorruptIndex("duplicate ids in flat payload")
        index: FlatIndex | IvfIndex = FlatIndex(dim)._finalize(ids, matrix)
    elif kind == 1:
        n_lists, n_probe = struct.unpack("<II", _read_exact(source, 8, "IVF header"))
        if n_lists < 1 or not 1 <= n_probe <= n_lists:
            raise CorruptIndex(f"invalid n_lists={n_lists} n_probe={n_probe}")
        raw = _read_exact(source, 4 * dim * n_lists, "centroids")
        centroids = np.frombuffer(raw, dtype="<f4").reshape(n_lists, dim).copy()
        lengths = struct.unpack(f"<{n_lists}Q", _read_exact(source, 8 * n_lists, "list lengths"))
        if sum(lengths) != count:
            raise CorruptIndex(f"list lengths sum {sum(lengths)} != count {count}")
        list_ids, list_matrices = [], []
        for li, n in enumerate(lengths):
            ids, matrix = read_entries(n, f"list {li}")
            list_ids.append(ids)
            list_matrices.append(matrix)
        all_ids = np.concatenate(list_ids) if count else np.empty(0, dtype=np.uint64)
        if len(set(all_ids.tolist())) != count:
            raise CorruptIndex("duplicate ids across IVF lists")
        index = IvfIndex(dim, centroids, list_ids, list_matrices, n_probe=n_probe)
    else:
        raise CorruptIndex(f"unknown index kind {kind}", offset=6)

    trailing = source.read(1)
    if trailing:
        raise CorruptIndex("trailing bytes after payload", offset=source.tell() - 1)
    return index


def parse_tsv_fixture(text: str) -> list[EmbeddingVector]:
    """Test fixture format: one 'id<TAB>v1,v2,...,vd' line per vector."""
    vectors = []
    for line in text.splitlines():
        if not line.strip():
            continue
        ident, _, rest = line.partition("\t")
        values = np.array([float(x) for x in rest.split(",")], dtype=np.float32)
        vectors.append(EmbeddingVector(int(ident), values))
    return vectors
