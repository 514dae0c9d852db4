"""Hashed sparse text features for the linear scorer backend.

Word unigrams, word bigrams, and character trigrams are hashed with FNV-1a
(64-bit) into 2^b buckets; bucket counts are L2-normalized. The feature map
is a pure function of the text, so identical texts always produce identical
vectors.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .corpus import Document, tokenize
from .errors import ValidationError

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes) -> int:
    """FNV-1a 64-bit hash."""
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _U64
    return h


@functools.lru_cache(maxsize=1 << 20)
def _feature_hash(feature: str) -> int:
    return fnv1a64(feature.encode("utf-8"))


@dataclass(frozen=True)
class FeatureVector:
    """Sparse L2-normalized bucket weights; norm is the pre-normalization L2 norm."""

    indices: np.ndarray  # int64, sorted ascending
    values: np.ndarray   # float64, unit L2 norm
    norm: float


def _features(tokens: list[str]) -> list[str]:
    feats = ["u\x1f" + t for t in tokens]
    feats.extend(f"b\x1f{a}\x1f{b}" for a, b in zip(tokens, tokens[1:]))
    joined = " ".join(tokens)
    feats.extend("c\x1f" + joined[i:i + 3] for i in range(len(joined) - 2))
    return feats


@functools.lru_cache(maxsize=1 << 16)
def featurize_text(text: str, hash_bits: int, max_tokens: int) -> FeatureVector:
    """Featurize raw text; see `featurize` for the document-level entry point."""
    tokens = tokenize(text)[:max_tokens]
    if not tokens:
        raise ValidationError("cannot featurize empty text")
    mask = (1 << hash_bits) - 1
    counts: dict[int, float] = {}
    for feat in _features(tokens):
        bucket = _feature_hash(feat) & mask
        counts[bucket] = counts.get(bucket, 0.0) + 1.0
    indices = np.array(sorted(counts), dtype=np.int64)
    values = np.array([counts[i] for i in indices], dtype=np.float64)
    norm = float(np.sqrt(np.sum(values * values)))
    values /= norm
    return FeatureVector(indices=indices, values=values, norm=norm)


def featurize(doc: Document, hash_bits: int, max_tokens: int) -> FeatureVector:
    return featurize_text(doc.text, hash_bits, max_tokens)
