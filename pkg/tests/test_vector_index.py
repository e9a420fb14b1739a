import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgrag import vector_index as vi
from kgrag.errors import (CorruptIndex, DimensionMismatch, DuplicateId,
                          InsufficientVectors, ZeroVector)
from kgrag.vector_index import EmbeddingVector

from oracles import brute_force_top_k


def vec(i, values):
    return EmbeddingVector(i, np.asarray(values, dtype=np.float32))


def random_vectors(rng, n, dim, start_id=0):
    return [EmbeddingVector(start_id + i, row)
            for i, row in enumerate(rng.standard_normal((n, dim)).astype(np.float32))]


class TestCosine:
    def test_self_similarity(self):
        v = vec(0, [0.3, -1.2, 4.0])
        assert vi.cosine(v, v) == pytest.approx(1.0, abs=1e-6)

    def test_orthogonal(self):
        assert vi.cosine(vec(0, [1, 0]), vec(1, [0, 1])) == 0.0

    def test_known_value(self):
        # independent scalar computation: 32/(sqrt(14)*sqrt(77))
        got = vi.cosine(vec(0, [1, 2, 3]), vec(1, [4, 5, 6]))
        assert got == pytest.approx(0.974631846, abs=1e-6)

    def test_symmetry(self):
        a, b = vec(0, [1, 2, 3]), vec(1, [-2, 0.5, 7])
        assert vi.cosine(a, b) == vi.cosine(b, a)

    def test_dim_mismatch(self):
        with pytest.raises(DimensionMismatch):
            vi.cosine(vec(0, [1, 2]), vec(1, [1, 2, 3]))

    def test_zero_vector(self):
        with pytest.raises(ZeroVector):
            vi.cosine(vec(0, [0, 0]), vec(1, [1, 0]))

    def test_clamped(self):
        v = vec(0, [1e-3] * 8)
        assert -1.0 <= vi.cosine(v, v) <= 1.0


class TestBuildFlat:
    def test_empty_index(self):
        index = vi.build_flat([], dim=8)
        assert len(index) == 0 and index.dim == 8

    def test_normalization(self):
        index = vi.build_flat([vec(0, [2.0, 0.0])])
        assert np.linalg.norm(index.matrix[0]) == pytest.approx(1.0, abs=1e-5)

    def test_duplicate_id(self):
        with pytest.raises(DuplicateId):
            vi.build_flat([vec(0, [1, 0]), vec(0, [0, 1])])

    def test_mixed_dims(self):
        with pytest.raises(DimensionMismatch):
            vi.build_flat([vec(0, [1, 0]), vec(1, [0, 1, 0])])

    def test_zero_vector_rejected(self):
        with pytest.raises(ZeroVector):
            vi.build_flat([vec(0, [0.0, 0.0])])

    def test_normalization_idempotent_bytes(self):
        rng = np.random.default_rng(3)
        vectors = random_vectors(rng, 50, 32)
        first = vi.build_flat(vectors)
        again = vi.build_flat([EmbeddingVector(int(i), row) for i, row
                               in zip(first.ids, first.matrix)])
        assert first.matrix.tobytes() == again.matrix.tobytes()


class TestTopK:
    def test_exact_match(self):
        direction = np.array([0.6, 0.8, 0.0], dtype=np.float32)
        index = vi.build_flat([vec(0, [1, 0, 0]), vec(1, [0, 0, 1]),
                               vec(2, direction * 3)])
        [hit] = vi.top_k(index, EmbeddingVector(99, direction), 1)
        assert hit.id == 2
        assert hit.score == pytest.approx(1.0, abs=1e-6)

    def test_saturation(self):
        rng = np.random.default_rng(0)
        index = vi.build_flat(random_vectors(rng, 5, 4))
        hits = vi.top_k(index, EmbeddingVector(9, rng.standard_normal(4).astype(np.float32)), 50)
        assert len(hits) == 5
        assert sorted((h.score for h in hits), reverse=True) == [h.score for h in hits]

    def test_ties_broken_by_ascending_id(self):
        v = np.array([1.0, 0.0], dtype=np.float32)
        index = vi.build_flat([vec(7, v), vec(3, v), vec(5, v)])
        hits = vi.top_k(index, vec(0, v), 3)
        assert [h.id for h in hits] == [3, 5, 7]

    def test_fixture_query_matches_oracle(self, fixture_embeddings, fixture_query):
        index = vi.build_flat(fixture_embeddings)
        hits = vi.top_k(index, fixture_query, 7)
        expected = brute_force_top_k(index.ids, index.matrix,
                                     fixture_query.values, 7)
        assert [(h.id, pytest.approx(h.score, abs=1e-6)) for h in hits] == \
            [(i, pytest.approx(s, abs=1e-6)) for i, s in expected]

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.sampled_from([4, 16, 64]),
           st.integers(1, 12))
    def test_oracle_equivalence(self, seed, dim, k):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 200))
        vectors = random_vectors(rng, n, dim)
        index = vi.build_flat(vectors)
        query = EmbeddingVector(10**6, rng.standard_normal(dim).astype(np.float32))
        hits = vi.top_k(index, query, k)
        expected = brute_force_top_k(index.ids, index.matrix, query.values, k)
        assert [h.id for h in hits] == [i for i, _ in expected]
        for h, (_, s) in zip(hits, expected):
            assert h.score == pytest.approx(s, abs=1e-6)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.floats(0.01, 100.0))
    def test_query_scale_invariance(self, seed, scale):
        rng = np.random.default_rng(seed)
        vectors = random_vectors(rng, 30, 8)
        index = vi.build_flat(vectors)
        q = rng.standard_normal(8).astype(np.float32)
        a = vi.top_k(index, EmbeddingVector(0, q), 10)
        b = vi.top_k(index, EmbeddingVector(0, q * scale), 10)
        assert [h.id for h in a] == [h.id for h in b]

    def test_monotone_prefix(self):
        rng = np.random.default_rng(11)
        index = vi.build_flat(random_vectors(rng, 40, 8))
        q = EmbeddingVector(0, rng.standard_normal(8).astype(np.float32))
        full = vi.top_k(index, q, 40)
        for k in (1, 3, 7, 20):
            assert vi.top_k(index, q, k) == full[:k]

    def test_zero_query(self):
        index = vi.build_flat([vec(0, [1.0, 0.0])])
        with pytest.raises(ZeroVector):
            vi.top_k(index, vec(9, [0.0, 0.0]), 1)

    def test_dim_mismatch(self):
        index = vi.build_flat([vec(0, [1.0, 0.0])])
        with pytest.raises(DimensionMismatch):
            vi.top_k(index, vec(9, [1.0, 0.0, 0.0]), 1)


def assert_hits_equal(a, b, tol=1e-12):
    assert [h.id for h in a] == [h.id for h in b]
    for x, y in zip(a, b):
        assert x.score == pytest.approx(y.score, abs=tol)


def clustered_vectors(rng, n_clusters, per_cluster, dim, spread=0.05):
    centers = rng.standard_normal((n_clusters, dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    vectors, assignment = [], []
    for c in range(n_clusters):
        for i in range(per_cluster):
            noise = rng.standard_normal(dim) * spread
            values = (centers[c] + noise).astype(np.float32)
            vectors.append(EmbeddingVector(len(vectors), values))
            assignment.append(c)
    return vectors, assignment


class TestIvf:
    def test_single_list_equals_flat(self):
        rng = np.random.default_rng(5)
        vectors = random_vectors(rng, 30, 8)
        flat = vi.build_flat(vectors)
        ivf = vi.build_ivf(vectors, n_lists=1, seed=0)
        q = EmbeddingVector(0, rng.standard_normal(8).astype(np.float32))
        assert_hits_equal(vi.search_ivf(ivf, q, 10, n_probe=1), vi.top_k(flat, q, 10))

    def test_two_separated_clusters(self):
        rng = np.random.default_rng(42)
        dim = 16
        center = rng.standard_normal(dim)
        center /= np.linalg.norm(center)
        vectors = []
        for i in range(20):
            sign = 1.0 if i < 10 else -1.0  # inter-centroid cosine < 0
            noise = rng.standard_normal(dim) * 0.05
            vectors.append(EmbeddingVector(i, (sign * center + noise).astype(np.float32)))
        ivf = vi.build_ivf(vectors, n_lists=2, seed=1)
        groups = [set(ids.tolist()) for ids in ivf.list_ids]
        assert sorted(groups, key=min) == [set(range(10)), set(range(10, 20))]

    def test_exhaustive_probe_equals_flat(self):
        rng = np.random.default_rng(8)
        vectors = random_vectors(rng, 60, 8)
        flat = vi.build_flat(vectors)
        ivf = vi.build_ivf(vectors, n_lists=4, seed=3)
        for qseed in range(5):
            qrng = np.random.default_rng(qseed)
            q = EmbeddingVector(0, qrng.standard_normal(8).astype(np.float32))
            assert_hits_equal(vi.search_ivf(ivf, q, 10, n_probe=4),
                              vi.top_k(flat, q, 10))

    def test_k_zero(self):
        rng = np.random.default_rng(1)
        vectors = random_vectors(rng, 10, 4)
        ivf = vi.build_ivf(vectors, n_lists=2, seed=0)
        q = EmbeddingVector(0, rng.standard_normal(4).astype(np.float32))
        assert vi.search_ivf(ivf, q, 0) == []

    def test_insufficient_vectors(self):
        rng = np.random.default_rng(2)
        with pytest.raises(InsufficientVectors):
            vi.build_ivf(random_vectors(rng, 3, 4), n_lists=5)

    def test_deterministic_for_seed(self):
        rng = np.random.default_rng(9)
        raw = rng.standard_normal((50, 8)).astype(np.float32)
        a = vi.build_ivf([EmbeddingVector(i, r) for i, r in enumerate(raw)], 4, seed=7)
        b = vi.build_ivf([EmbeddingVector(i, r) for i, r in enumerate(raw)], 4, seed=7)
        assert a.centroids.tobytes() == b.centroids.tobytes()
        assert all(x.tolist() == y.tolist() for x, y in zip(a.list_ids, b.list_ids))

    def test_recall_on_gaussian_mixture(self):
        rng = np.random.default_rng(2024)
        vectors, _ = clustered_vectors(rng, 8, 125, 128, spread=0.1)
        flat = vi.build_flat(vectors)
        ivf = vi.build_ivf(vectors, n_lists=16, seed=0)
        hits_total, found = 0, 0
        for qi in range(200):
            base = vectors[(qi * 5) % len(vectors)].values
            q = EmbeddingVector(0, base + rng.standard_normal(128).astype(np.float32) * 0.1)
            truth = {h.id for h in vi.top_k(flat, q, 10)}
            got = {h.id for h in vi.search_ivf(ivf, q, 10, n_probe=4)}
            hits_total += len(truth)
            found += len(truth & got)
        assert found / hits_total >= 0.90

    def test_ivf_soundness(self):
        rng = np.random.default_rng(31)
        vectors = random_vectors(rng, 100, 16)
        flat = vi.build_flat(vectors)
        ivf = vi.build_ivf(vectors, n_lists=8, seed=0)
        q = EmbeddingVector(0, rng.standard_normal(16).astype(np.float32))
        flat_scores = {h.id: h.score for h in vi.top_k(flat, q, 100)}
        for hit in vi.search_ivf(ivf, q, 20, n_probe=3):
            assert hit.id in flat_scores
            assert hit.score == pytest.approx(flat_scores[hit.id], abs=1e-6)


class TestPersistence:
    def test_embeddings_round_trip(self, fixture_embeddings):
        buf = io.BytesIO()
        vi.save_embeddings(fixture_embeddings, buf)
        buf.seek(0)
        loaded = vi.load_embeddings(buf)
        assert [v.id for v in loaded] == [v.id for v in fixture_embeddings]
        for a, b in zip(loaded, fixture_embeddings):
            assert a.values.tobytes() == b.values.tobytes()

    def test_flat_round_trip_search_identical(self):
        rng = np.random.default_rng(77)
        vectors = random_vectors(rng, 1000, 32)
        index = vi.build_flat(vectors)
        buf = io.BytesIO()
        vi.save_index(index, buf)
        buf.seek(0)
        loaded = vi.load_index(buf)
        assert loaded.matrix.tobytes() == index.matrix.tobytes()
        for _ in range(50):
            q = EmbeddingVector(0, rng.standard_normal(32).astype(np.float32))
            assert vi.top_k(loaded, q, 10) == vi.top_k(index, q, 10)

    def test_ivf_round_trip(self):
        rng = np.random.default_rng(78)
        vectors = random_vectors(rng, 200, 16)
        index = vi.build_ivf(vectors, n_lists=4, seed=0, n_probe=2)
        buf = io.BytesIO()
        vi.save_index(index, buf)
        buf.seek(0)
        loaded = vi.load_index(buf)
        assert isinstance(loaded, vi.IvfIndex)
        assert loaded.centroids.tobytes() == index.centroids.tobytes()
        q = EmbeddingVector(0, rng.standard_normal(16).astype(np.float32))
        assert vi.search_ivf(loaded, q, 10) == vi.search_ivf(index, q, 10)

    def test_save_is_deterministic(self):
        rng = np.random.default_rng(79)
        vectors = random_vectors(rng, 50, 8)
        bufs = []
        for _ in range(2):
            buf = io.BytesIO()
            vi.save_index(vi.build_flat(vectors), buf)
            bufs.append(buf.getvalue())
        assert bufs[0] == bufs[1]

    def test_truncated_rejected(self):
        rng = np.random.default_rng(80)
        buf = io.BytesIO()
        vi.save_index(vi.build_flat(random_vectors(rng, 10, 8)), buf)
        data = buf.getvalue()
        with pytest.raises(CorruptIndex):
            vi.load_index(io.BytesIO(data[:len(data) // 2]))

    def test_wrong_magic_rejected(self):
        rng = np.random.default_rng(81)
        buf = io.BytesIO()
        vi.save_index(vi.build_flat(random_vectors(rng, 10, 8)), buf)
        data = bytearray(buf.getvalue())
        data[:4] = b"XXXX"
        with pytest.raises(CorruptIndex):
            vi.load_index(io.BytesIO(bytes(data)))


class TestTsvFixture:
    def test_parse(self):
        vectors = vi.parse_tsv_fixture("0\t1.0,2.0\n1\t3.0,4.0\n")
        assert len(vectors) == 2
        assert vectors[1].values.tolist() == [3.0, 4.0]
