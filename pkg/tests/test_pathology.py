import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgrag import pathology as pa
from kgrag.errors import (CorruptIndex, DegenerateLabels, NonFiniteInput,
                          OutOfRangeScore, ShapeMismatch)
from kgrag.pathology import Certainty, DenseWeights, ThresholdConfig

from oracles import certainty_oracle, forward_oracle, pairwise_auc


def single_layer(w, b, act="identity"):
    return DenseWeights([(np.asarray(w, dtype=float),
                          np.asarray(b, dtype=float), act)])


class TestForward:
    def test_identity_map(self):
        weights = single_layer(np.eye(4), np.zeros(4))
        x = np.array([1.0, -2.0, 3.0, 0.5])
        assert pa.forward(weights, x).tolist() == x.tolist()

    def test_sigmoid_at_zero(self):
        weights = single_layer([[1.0, 1.0]], [0.0], "sigmoid")
        assert pa.forward(weights, np.zeros(2))[0] == pytest.approx(0.5)

    def test_two_layer_against_oracle(self):
        rng = np.random.default_rng(12)
        w1, b1 = rng.standard_normal((5, 3)), rng.standard_normal(5)
        w2, b2 = rng.standard_normal((2, 5)), rng.standard_normal(2)
        weights = DenseWeights([(w1, b1, "relu"), (w2, b2, "sigmoid")])
        x = rng.standard_normal(3)
        got = pa.forward(weights, x)
        want = forward_oracle([(w1, b1, "relu"), (w2, b2, "sigmoid")], x)
        assert got == pytest.approx(want, abs=1e-6)

    def test_gelu_against_oracle(self):
        rng = np.random.default_rng(13)
        w, b = rng.standard_normal((4, 4)), rng.standard_normal(4)
        x = rng.standard_normal(4)
        got = pa.forward(DenseWeights([(w, b, "gelu")]), x)
        assert got == pytest.approx(forward_oracle([(w, b, "gelu")], x), abs=1e-6)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            pa.forward(single_layer(np.eye(3), np.zeros(3)), np.zeros(2))

    def test_non_finite_input(self):
        with pytest.raises(NonFiniteInput):
            pa.forward(single_layer(np.eye(2), np.zeros(2)),
                       np.array([1.0, np.nan]))

    def test_chained_shapes_validated(self):
        with pytest.raises(ShapeMismatch):
            DenseWeights([(np.zeros((3, 2)), np.zeros(3), "identity"),
                          (np.zeros((2, 4)), np.zeros(2), "identity")])

    @given(st.floats(0.1, 10.0))
    def test_positive_homogeneity(self, c):
        rng = np.random.default_rng(4)
        w = rng.standard_normal((3, 3))
        weights = DenseWeights([(w, np.zeros(3), "identity")])
        z = rng.standard_normal(3)
        assert pa.forward(weights, c * z) == pytest.approx(
            c * pa.forward(weights, z), rel=1e-9)


class TestProject:
    def test_identity(self):
        weights = single_layer(np.eye(3), np.zeros(3))
        z = np.array([1.0, 2.0, 3.0])
        assert pa.project(weights, z).tolist() == z.tolist()

    def test_zero_weight_gives_bias(self):
        b = np.array([0.5, -1.0])
        weights = single_layer(np.zeros((2, 3)), b)
        assert pa.project(weights, np.ones(3)).tolist() == b.tolist()

    def test_fixed_matrix_against_oracle(self):
        rng = np.random.default_rng(21)
        w, b = rng.standard_normal((4, 3)), rng.standard_normal(4)
        z = rng.standard_normal(3)
        got = pa.project(single_layer(w, b), z)
        assert got == pytest.approx(forward_oracle([(w, b, "identity")], z),
                                    abs=1e-6)

    def test_rejects_multi_layer(self):
        weights = DenseWeights([(np.eye(2), np.zeros(2), "identity"),
                                (np.eye(2), np.zeros(2), "identity")])
        with pytest.raises(ShapeMismatch):
            pa.project(weights, np.zeros(2))

    def test_rejects_nonidentity_activation(self):
        with pytest.raises(ShapeMismatch):
            pa.project(single_layer(np.eye(2), np.zeros(2), "relu"), np.zeros(2))


class TestCertainty:
    CFG = ThresholdConfig(theta_neg=1 / 3, theta_pos=2 / 3)

    def test_below_neg(self):
        assert pa.certainty(0.10, self.CFG) == Certainty.negative

    def test_boundaries_left_closed(self):
        assert pa.certainty(1 / 3, self.CFG) == Certainty.uncertain
        assert pa.certainty(2 / 3, self.CFG) == Certainty.positive

    def test_out_of_range(self):
        with pytest.raises(OutOfRangeScore):
            pa.certainty(1.5, self.CFG)
        with pytest.raises(OutOfRangeScore):
            pa.certainty(-0.1, self.CFG)

    @pytest.mark.parametrize("theta", [(1/3, 2/3), (0.0, 0.5), (0.25, 0.25),
                                       (0.1, 0.9), (0.5, 1.0)])
    def test_grid_matches_piecewise_oracle(self, theta):
        cfg = ThresholdConfig(*theta)
        for i in range(1001):
            score = i / 1000.0
            assert pa.certainty(score, cfg).name == \
                certainty_oracle(score, *theta)

    @given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
    def test_monotone(self, a, b):
        lo, hi = sorted((a, b))
        assert pa.certainty(lo, self.CFG) <= pa.certainty(hi, self.CFG)

    def test_invalid_thresholds(self):
        with pytest.raises(OutOfRangeScore):
            ThresholdConfig(theta_neg=0.7, theta_pos=0.3)


class TestRocAuc:
    def test_perfect_ranking(self):
        assert pa.roc_auc([0.9, 0.1], [1, 0]) == 1.0

    def test_all_ties(self):
        assert pa.roc_auc([0.5, 0.5, 0.5, 0.5], [1, 0, 1, 0]) == 0.5

    def test_random_against_pair_oracle(self):
        rng = np.random.default_rng(55)
        for _ in range(20):
            n = int(rng.integers(5, 200))
            scores = rng.choice([0.1, 0.3, 0.5, 0.7, 0.9], size=n).tolist()
            labels = rng.integers(0, 2, size=n).tolist()
            if len(set(labels)) < 2:
                continue
            assert pa.roc_auc(scores, labels) == pytest.approx(
                pairwise_auc(scores, labels), abs=1e-9)

    def test_degenerate_labels(self):
        with pytest.raises(DegenerateLabels):
            pa.roc_auc([0.1, 0.2], [1, 1])

    def test_complement_identity(self):
        rng = np.random.default_rng(56)
        scores = rng.random(100).tolist()
        labels = rng.integers(0, 2, size=100).tolist()
        flipped = [1 - y for y in labels]
        assert pa.roc_auc(scores, labels) + pa.roc_auc(scores, flipped) == \
            pytest.approx(1.0, abs=1e-12)

    @given(st.integers(0, 10**6))
    @settings(max_examples=20, deadline=None)
    def test_invariant_under_monotone_transform(self, seed):
        rng = np.random.default_rng(seed)
        scores = rng.random(30)
        labels = rng.integers(0, 2, size=30).tolist()
        if len(set(labels)) < 2:
            return
        base = pa.roc_auc(scores.tolist(), labels)
        warped = (np.exp(3 * scores) + 7).tolist()
        assert pa.roc_auc(warped, labels) == pytest.approx(base, abs=1e-12)

    def test_macro_skips_degenerate(self):
        mean, skipped = pa.macro_auc([[0.9, 0.1], [0.5, 0.6]],
                                     [[1, 0], [1, 1]])
        assert mean == 1.0
        assert skipped == [1]


class TestClassify:
    def test_labels_and_certainties(self):
        cfg = ThresholdConfig(labels=("A", "B"))
        weights = single_layer(np.eye(2) * 10, np.zeros(2))
        preds = pa.classify(weights, np.array([1.0, -1.0]), cfg)
        assert [p.label for p in preds] == ["A", "B"]
        assert preds[0].certainty == Certainty.positive
        assert preds[1].certainty == Certainty.negative


class TestWeightsPersistence:
    def build(self):
        rng = np.random.default_rng(90)
        return DenseWeights([
            (rng.standard_normal((8, 4)).astype(np.float32),
             rng.standard_normal(8).astype(np.float32), "relu"),
            (rng.standard_normal((3, 8)).astype(np.float32),
             rng.standard_normal(3).astype(np.float32), "sigmoid"),
        ])

    def test_round_trip(self):
        weights = self.build()
        buf = io.BytesIO()
        pa.save_weights(weights, buf)
        buf.seek(0)
        loaded = pa.load_weights(buf)
        for (w1, b1, a1), (w2, b2, a2) in zip(weights.layers, loaded.layers):
            assert a1 == a2
            assert w1.astype("<f4").tobytes() == w2.astype("<f4").tobytes()
            assert b1.astype("<f4").tobytes() == b2.astype("<f4").tobytes()

    def test_bad_magic(self):
        buf = io.BytesIO()
        pa.save_weights(self.build(), buf)
        data = bytearray(buf.getvalue())
        data[:4] = b"NOPE"
        with pytest.raises(CorruptIndex):
            pa.load_weights(io.BytesIO(bytes(data)))

    def test_truncation(self):
        buf = io.BytesIO()
        pa.save_weights(self.build(), buf)
        with pytest.raises(CorruptIndex):
            pa.load_weights(io.BytesIO(buf.getvalue()[:-3]))

    def test_bad_activation_tag(self):
        buf = io.BytesIO()
        pa.save_weights(self.build(), buf)
        data = bytearray(buf.getvalue())
        data[4 + 6 + 8] = 250  # first layer's activation byte
        with pytest.raises(CorruptIndex):
            pa.load_weights(io.BytesIO(bytes(data)))
