"""Pathology classification head: dense forward pass over loaded weights,
linear projection, three-way certainty discretization and ROC-AUC scoring.

Weights are always loaded, never trained here. KGWT file layout
(little-endian): magic "KGWT", u16 version=1, u32 n_layers, then per layer
u32 out, u32 in, u8 activation tag, out*in row-major f32 weights, out f32
biases.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np

from .errors import (CorruptIndex, DegenerateLabels, NonFiniteInput,
                     OutOfRangeScore, ShapeMismatch)

KGWT_MAGIC = b"KGWT"

ACTIVATIONS = ("identity", "relu", "gelu", "sigmoid")


class Certainty(enum.IntEnum):
    """Three-way certainty level; the integer order backs monotonicity."""
    negative = 0
    uncertain = 1
    positive = 2


@dataclass(frozen=True)
class ThresholdConfig:
    theta_neg: float = 1.0 / 3.0
    theta_pos: float = 2.0 / 3.0
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        if not 0.0 <= self.theta_neg <= self.theta_pos <= 1.0:
            raise OutOfRangeScore(
                f"need 0 <= theta_neg <= theta_pos <= 1, got "
                f"({self.theta_neg}, {self.theta_pos})")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("labels must be pairwise distinct")


@dataclass(frozen=True)
class PathologyPrediction:
    label: str
    score: float
    certainty: Certainty


@dataclass
class DenseWeights:
    """Ordered (weight out x in, bias out, activation tag) layers."""
    layers: list[tuple[np.ndarray, np.ndarray, str]]

    def __post_init__(self):
        prev_out = None
        for i, (w, b, act) in enumerate(self.layers):
            w = np.asarray(w, dtype=np.float64)
            b = np.asarray(b, dtype=np.float64)
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ShapeMismatch(f"layer {i}: weight {w.shape} vs bias {b.shape}")
            if act not in ACTIVATIONS:
                raise ShapeMismatch(f"layer {i}: unknown activation {act!r}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise NonFiniteInput(f"layer {i}: non-finite parameters")
            if prev_out is not None and w.shape[1] != prev_out:
                raise ShapeMismatch(
                    f"layer {i}: in-dim {w.shape[1]} != previous out-dim {prev_out}")
            prev_out = w.shape[0]
            self.layers[i] = (w, b, act)

    @property
    def in_dim(self) -> int:
        return int(self.layers[0][0].shape[1])

    @property
    def out_dim(self) -> int:
        return int(self.layers[-1][0].shape[0])


def _activate(x: np.ndarray, tag: str) -> np.ndarray:
    if tag == "identity":
        return x
    if tag == "relu":
        return np.maximum(x, 0.0)
    if tag == "gelu":
        # exact (erf) form
        from math import sqrt
        from scipy.special import erf  # type: ignore[import-untyped]
        return 0.5 * x * (1.0 + erf(x / sqrt(2.0)))
    if tag == "sigmoid":
        return 1.0 / (1.0 + np.exp(-x))
    raise ShapeMismatch(f"unknown activation {tag!r}")


def forward(weights: DenseWeights, z_v: np.ndarray) -> np.ndarray:
    """Affine-then-activation per layer over a single input vector."""
    x = np.asarray(z_v, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeMismatch(f"expected a vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("input contains NaN/Inf")
    if x.shape[0] != weights.in_dim:
        raise ShapeMismatch(f"input dim {x.shape[0]} != {weights.in_dim}")
    for w, b, act in weights.layers:
        x = _activate(w @ x + b, act)
    return x


def project(weights: DenseWeights, z_v: np.ndarray) -> np.ndarray:
    """Single identity-activation linear layer: H_v = W z_v + b."""
    if len(weights.layers) != 1 or weights.layers[0][2] != "identity":
        raise ShapeMismatch("projector must be a single identity-activation layer")
    return forward(weights, z_v)


def certainty(score: float, cfg: ThresholdConfig) -> Certainty:
    """negative if score < theta_neg; uncertain if theta_neg <= score <
    theta_pos; positive if score >= theta_pos."""
    if not 0.0 <= score <= 1.0 or not np.isfinite(score):
        raise OutOfRangeScore(f"score {score} outside [0, 1]")
    if score < cfg.theta_neg:
        return Certainty.negative
    if score < cfg.theta_pos:
        return Certainty.uncertain
    return Certainty.positive


def classify(weights: DenseWeights, z_v: np.ndarray,
             cfg: ThresholdConfig) -> list[PathologyPrediction]:
    """Run the head and discretize every per-label sigmoid score.

    A sigmoid is appended when the final layer is not already sigmoid so
    scores are per-label independent probabilities.
    """
    out = forward(weights, z_v)
    if weights.layers[-1][2] != "sigmoid":
        out = _activate(out, "sigmoid")
    if len(cfg.labels) != out.shape[0]:
        raise ShapeMismatch(f"{out.shape[0]} scores for {len(cfg.labels)} labels")
    return [PathologyPrediction(label, float(s), certainty(float(s), cfg))
            for label, s in zip(cfg.labels, out)]


def roc_auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Mann-Whitney AUC: P(score_pos > score_neg) + 0.5 * P(tie).

    Computed via tied ranks, equivalent to averaging over all
    positive/negative pairs with half credit for ties.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ShapeMismatch(f"scores {s.shape} vs labels {y.shape}")
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabels(f"need both classes, got {n_pos} pos / {n_neg} neg")
    order = np.argsort(s, kind="stable")
    ranks = np.empty(len(s), dtype=np.float64)
    sorted_s = s[order]
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0  # average 1-based rank
        i = j + 1
    rank_sum_pos = float(np.sum(ranks[y == 1]))
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def macro_auc(score_columns: Sequence[Sequence[float]],
              label_columns: Sequence[Sequence[int]]) -> tuple[float | None, list[int]]:
    """Unweighted mean AUC over labels; labels with a missing class are
    skipped and reported, never fabricated. Returns (mean or None, skipped)."""
    if len(score_columns) != len(label_columns):
        raise ShapeMismatch("score/label column count mismatch")
    values, skipped = [], []
    for i, (s, y) in enumerate(zip(score_columns, label_columns)):
        try:
            values.append(roc_auc(s, y))
        except DegenerateLabels:
            skipped.append(i)
    if not values:
        return None, skipped
    return float(np.mean(values)), skipped


# --- KGWT persistence ---------------------------------------------------

def _read_exact(source: IO[bytes], n: int, what: str) -> bytes:
    data = source.read(n)
    if len(data) != n:
        raise CorruptIndex(f"truncated while reading {what}",
                           offset=source.tell() - len(data))
    return data


def save_weights(weights: DenseWeights, sink: IO[bytes]) -> None:
    sink.write(KGWT_MAGIC)
    sink.write(struct.pack("<HI", 1, len(weights.layers)))
    for w, b, act in weights.layers:
        out_d, in_d = w.shape
        sink.write(struct.pack("<IIB", out_d, in_d, ACTIVATIONS.index(act)))
        sink.write(w.astype("<f4").tobytes())
        sink.write(b.astype("<f4").tobytes())


def load_weights(source: IO[bytes]) -> DenseWeights:
    magic = _read_exact(source, 4, "magic")
    if magic != KGWT_MAGIC:
        raise CorruptIndex(f"bad magic {magic!r}, expected {KGWT_MAGIC!r}", offset=0)
    version, n_layers = struct.unpack("<HI", _read_exact(source, 6, "header"))
    if version != 1:
        raise CorruptIndex(f"unsupported KGWT version {version}", offset=4)
    layers = []
    for i in range(n_layers):
        out_d, in_d, act_tag = struct.unpack("<IIB", _read_exact(source, 9, f"layer {i} header"))
        if act_tag >= len(ACTIVATIONS):
            raise CorruptIndex(f"layer {i}: unknown activation tag {act_tag}")
        if out_d < 1 or in_d < 1:
            raise CorruptIndex(f"layer {i}: invalid shape {out_d}x{in_d}")
        w_raw = _read_exact(source, 4 * out_d * in_d, f"layer {i} weights")
        b_raw = _read_exact(source, 4 * out_d, f"layer {i} bias")
        w = np.frombuffer(w_raw, dtype="<f4").reshape(out_d, in_d)
        b = np.frombuffer(b_raw, dtype="<f4")
        layers.append((w, b, ACTIVATIONS[act_tag]))
    trailing = source.read(1)
    if trailing:
        raise CorruptIndex("trailing bytes after last layer", offset=source.tell() - 1)
    try:
        return DenseWeights(layers)
    except (ShapeMismatch, NonFiniteInput) as exc:
        raise CorruptIndex(f"invalid weights: {exc}") from None
