"""Text encoders. The default is a deterministic local hashing encoder.

Any sentence-level encoder works; the identifier is recorded in the export
manifest so downstream runs know what produced the vectors. The hashing
encoder exists so the pipeline has a reproducible, dependency-free default
that needs no model download.
"""

from __future__ import annotations

import hashlib
import re

import numpy as np

from .corpus_io import PrepError

DEFAULT_ENCODER = "hashing-v1"
DEFAULT_DIM = 256

_TOKEN = re.compile(r"[a-z0-9]+")


class HashingEncoder:
    """Bag-of-token-hashes embedding: stable across runs, platforms, and order.

    Each token (unigrams plus adjacent bigrams) is mapped through sha256 to a
    coordinate and a sign; token counts accumulate and the result is
    L2-normalized. Empty text maps to a fixed unit basis vector.
    """

    def __init__(self, dim: int = DEFAULT_DIM):
        if dim < 2:
            raise PrepError(f"encoder dim must be at least 2, got {dim}")
        self.dim = dim
        self.identifier = f"{DEFAULT_ENCODER}-d{dim}"

    def _slot(self, token: str) -> tuple[int, float]:
        digest = hashlib.sha256(token.encode("utf-8")).digest()
        index = int.from_bytes(digest[:8], "little") % self.dim
        sign = 1.0 if digest[8] % 2 == 0 else -1.0
        return index, sign

    def encode_one(self, text: str) -> np.ndarray:
        tokens = _TOKEN.findall(text.lower())
        tokens += [f"{a}_{b}" for a, b in zip(tokens, tokens[1:])]
        vec = np.zeros(self.dim, dtype=np.float64)
        for token in tokens:
            index, sign = self._slot(token)
            vec[index] += sign
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            vec[0] = 1.0
            return vec
        return vec / norm

    def encode(self, texts: list[str]) -> np.ndarray:
        return np.stack([self.encode_one(t) for t in texts])


class SentenceTransformerEncoder:
    """Thin wrapper around a sentence-transformers model, normalized rows."""

    def __init__(self, model_name: str):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise PrepError(
                f"encoder {model_name!r} needs the sentence-transformers package"
            ) from exc
        try:
            self._model = SentenceTransformer(model_name)
        except Exception as exc:
            raise PrepError(f"failed to load encoder {model_name!r}: {exc}") from exc
        self.dim = int(self._model.get_sentence_embedding_dimension())
        self.identifier = model_name

    def encode(self, texts: list[str]) -> np.ndarray:
        out = np.asarray(self._model.encode(texts, normalize_embeddings=True), dtype=np.float64)
        return out


def load_encoder(identifier: str = DEFAULT_ENCODER, dim: int = DEFAULT_DIM):
    """Resolve an encoder identifier: 'hashing-v1' locally, anything else via
    sentence-transformers."""
    if identifier == DEFAULT_ENCODER or identifier.startswith(DEFAULT_ENCODER + "-d"):
        if identifier.startswith(DEFAULT_ENCODER + "-d"):
            dim = int(identifier.rsplit("-d", 1)[1])
        return HashingEncoder(dim)
    return SentenceTransformerEncoder(identifier)
