"""Embedding index and domain-aware reference retrieval.

Retrieval is an exact linear scan over unit-normalized topic embeddings:
candidates above a cosine threshold are kept, then the k with the smallest
publication-date gap to the target win (ties by higher similarity, then id).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from datetime import date
from pathlib import Path

import numpy as np

from .corpus import Corpus


class RetrievalError(ValueError):
    pass


@dataclass(frozen=True)
class EmbeddingIndex:
    """Immutable id -> unit-vector map plus publication dates."""

    dim: int
    ids: tuple[str, ...]
    matrix: np.ndarray  # (n, dim), rows L2-normalized
    dates: tuple[date, ...]

    def __post_init__(self):
        object.__setattr__(self, "_row", {rid: i for i, rid in enumerate(self.ids)})

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, rid: str) -> bool:
        return rid in self._row

    def vector(self, rid: str) -> np.ndarray:
        return self.matrix[self._row[rid]]

    def date_of(self, rid: str) -> date:
        return self.dates[self._row[rid]]


@dataclass(frozen=True)
class Reference:
    id: str
    similarity: float
    date_gap_days: int


@dataclass(frozen=True)
class ReferenceSet:
    target_id: str
    references: tuple[Reference, ...]

    def ids(self) -> list[str]:
        return [r.id for r in self.references]


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise RetrievalError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise RetrievalError("cosine similarity undefined for a zero vector")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def build_index(corpus: Corpus, matrix: np.ndarray, ids: list[str]) -> EmbeddingIndex:
    """Align embedding rows with the corpus and normalize them to unit length."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[1] == 0:
        raise RetrievalError("embedding matrix must be 2-D with positive dim")
    if len(ids) != matrix.shape[0]:
        raise RetrievalError("id list length does not match embedding row count")
    corpus_ids = corpus.ids()
    missing = set(corpus_ids) - set(ids)
    extra = set(ids) - set(corpus_ids)
    if missing:
        raise RetrievalError(f"missing embedding rows for ids: {sorted(missing)[:5]}")
    if extra:
        raise RetrievalError(f"embedding rows for unknown ids: {sorted(extra)[:5]}")

    row_of = {rid: i for i, rid in enumerate(ids)}
    ordered = matrix[[row_of[rid] for rid in corpus_ids]]
    norms = np.linalg.norm(ordered, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise RetrievalError(f"zero-norm embedding for id {corpus_ids[int(zero[0])]!r}")
    return EmbeddingIndex(
        dim=int(matrix.shape[1]),
        ids=tuple(corpus_ids),
        matrix=ordered / norms[:, None],
        dates=tuple(r.published_at for r in corpus.records),
    )


def retrieve_references(
    target_id: str,
    index: EmbeddingIndex,
    gamma: float,
    k: int,
    past_only: bool = False,
) -> ReferenceSet:
    """Exact-scan retrieval of at most k concurrent, similar papers."""
    if target_id not in index:
        raise RetrievalError(f"unknown target id {target_id!r}")
    if k < 1:
        raise RetrievalError("k must be a positive integer")
    tvec = index.vector(target_id)
    tdate = index.date_of(target_id)
    sims = index.matrix @ tvec
    candidates: list[tuple[int, float, str]] = []
    for i, rid in enumerate(index.ids):
        if rid == target_id:
            continue
        sim = float(np.clip(sims[i], -1.0, 1.0))
        if sim <= gamma:
            continue
        delta = (index.dates[i] - tdate).days
        if past_only and delta > 0:
            continue
        candidates.append((abs(delta), sim, rid))
    candidates.sort(key=lambda c: (c[0], -c[1], c[2]))
    refs = tuple(Reference(id=rid, similarity=sim, date_gap_days=gap) for gap, sim, rid in candidates[:k])
    return ReferenceSet(target_id=target_id, references=refs)


# -- embedding file pair ---------------------------------------------------
#
# <name>.json: {"dim": D, "count": N, "dtype": "f32", "order": "row-major",
#               "ids": [...]}
# <name>.bin:  N*D little-endian float32, row-major, rows in id order.


def write_embeddings(path_base: str | Path, ids: list[str], matrix: np.ndarray) -> None:
    base = Path(path_base)
    matrix = np.ascontiguousarray(np.asarray(matrix, dtype="<f4"))
    if matrix.ndim != 2 or matrix.shape[0] != len(ids):
        raise RetrievalError("embedding matrix shape does not match id list")
    header = {
        "dim": int(matrix.shape[1]),
        "count": int(matrix.shape[0]),
        "dtype": "f32",
        "order": "row-major",
        "ids": list(ids),
    }
    base.with_suffix(".json").write_text(json.dumps(header) + "\n", encoding="utf-8")
    base.with_suffix(".bin").write_bytes(matrix.tobytes())


def read_embeddings(path_base: str | Path) -> tuple[list[str], np.ndarray]:
    base = Path(path_base)
    header_path = base.with_suffix(".json")
    bin_path = base.with_suffix(".bin")
    if not header_path.exists() or not bin_path.exists():
        raise RetrievalError(f"embedding file pair not found at {base}.json/.bin")
    header = json.loads(header_path.read_text(encoding="utf-8"))
    for key in ("dim", "count", "dtype", "order", "ids"):
        if key not in header:
            raise RetrievalError(f"embedding header missing key {key!r}")
    if header["dtype"] != "f32" or header["order"] != "row-major":
        raise RetrievalError("unsupported embedding dtype/order")
    n, d = int(header["count"]), int(header["dim"])
    ids = list(header["ids"])
    if len(ids) != n:
        raise RetrievalError("embedding header id list length disagrees with count")
    blob = bin_path.read_bytes()
    expected = n * d * struct.calcsize("<f")
    if len(blob) != expected:
        raise RetrievalError(f"embedding blob is {len(blob)} bytes, expected {expected}")
    matrix = np.frombuffer(blob, dtype="<f4").reshape(n, d).astype(np.float64)
    return ids, matrix
