"""Encoders turning atomic leaf values into fixed-size numeric vectors.

Numbers pass through as-is, booleans map to {0,1}, low-cardinality strings
are one-hot encoded with an out-of-vocabulary slot, and high-cardinality
strings become byte-trigram count histograms folded into 2053 buckets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .data import value_category
from .errors import KindMismatch
from .schema import ATOMIC, SchemaNode

TRIGRAM_BUCKETS = 2053

# Strings with fewer distinct values than this are treated as categorical.
CATEGORICAL_THRESHOLD = 100

IDENTITY = "identity"
BOOLEAN = "boolean"
ONEHOT = "onehot"
TRIGRAM = "trigram"


@dataclass(frozen=True)
class EncoderSpec:
    kind: str
    vocabulary: tuple[str, ...] = ()

    @property
    def dim(self) -> int:
        if self.kind == ONEHOT:
            return len(self.vocabulary) + 1  # extra out-of-vocabulary slot
        if self.kind == TRIGRAM:
            return TRIGRAM_BUCKETS
        return 1

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"kind": self.kind}
        if self.kind == ONEHOT:
            out["vocabulary"] = list(self.vocabulary)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "EncoderSpec":
        return cls(data["kind"], tuple(data.get("vocabulary", ())))


def choose_encoder(
    atomic: SchemaNode, categorical_threshold: int = CATEGORICAL_THRESHOLD
) -> EncoderSpec:
    """Pick the encoder for an atomic schema node from its statistics."""
    assert atomic.variant == ATOMIC
    if atomic.value_kind == "number":
        return EncoderSpec(IDENTITY)
    if atomic.value_kind == "bool":
        return EncoderSpec(BOOLEAN)
    if atomic.unique_count < categorical_threshold:
        vocab = tuple(sorted(str(v) for v in atomic.value_histogram))
        return EncoderSpec(ONEHOT, vocab)
    return EncoderSpec(TRIGRAM)


def trigram_bucket(b0: int, b1: int, b2: int) -> int:
    """Bucket of one byte trigram: base-256 integer id modulo the bucket count."""
    return (b0 * 65536 + b1 * 256 + b2) % TRIGRAM_BUCKETS


def encode_sparse(value: Any, spec: EncoderSpec) -> tuple[np.ndarray, np.ndarray]:
    """Sparse encoding as (indices, values); indices are strictly increasing."""
    category = value_category(value)
    if spec.kind == IDENTITY:
        if category != "number":
            raise KindMismatch(f"expected number, got {category}")
        return np.array([0], dtype=np.int64), np.array([float(value)], dtype=np.float64)
    if spec.kind == BOOLEAN:
        if category != "bool":
            raise KindMismatch(f"expected bool, got {category}")
        return (
            np.array([0], dtype=np.int64),
            np.array([1.0 if value else 0.0], dtype=np.float64),
        )
    if category != "string":
        raise KindMismatch(f"expected string, got {category}")
    if spec.kind == ONEHOT:
        try:
            idx = spec.vocabulary.index(value)
        except ValueError:
            idx = len(spec.vocabulary)  # out-of-vocabulary slot
        return np.array([idx], dtype=np.int64), np.array([1.0], dtype=np.float64)
    # trigram histogram; strings shorter than 3 bytes encode to the zero vector
    raw = value.encode("utf-8")
    counts: dict[int, int] = {}
    for i in range(len(raw) - 2):
        bucket = trigram_bucket(raw[i], raw[i + 1], raw[i + 2])
        counts[bucket] = counts.get(bucket, 0) + 1
    if not counts:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64)
    idx = np.array(sorted(counts), dtype=np.int64)
    val = np.array([counts[i] for i in idx], dtype=np.float64)
    return idx, val


def encode(value: Any, spec: EncoderSpec) -> np.ndarray:
    """Dense encoding vector of length spec.dim."""
    idx, val = encode_sparse(value, spec)
    out = np.zeros(spec.dim, dtype=np.float64)
    out[idx] = val
    return out
