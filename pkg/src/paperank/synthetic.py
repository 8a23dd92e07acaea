"""Synthetic corpora with noiseless smooth scores, for tests and benchmarks."""

from __future__ import annotations

from datetime import date, timedelta

import numpy as np

from .corpus import Corpus, PaperRecord


def make_synthetic(
    n: int = 2000,
    dim: int = 32,
    seed: int = 0,
    start: date = date(2024, 1, 1),
) -> tuple[Corpus, list[str], np.ndarray]:
    """n papers with unit embeddings and score = logistic(4 * w . e).

    The score is a clamped-to-(0,1), noiseless, smooth function of the
    embedding, so a trained model can in principle rank perfectly.
    Publication dates advance one day per paper.
    """
    rng = np.random.default_rng(seed)
    matrix = rng.standard_normal((n, dim))
    matrix /= np.linalg.norm(matrix, axis=1, keepdims=True)
    w = rng.standard_normal(dim)
    w /= np.linalg.norm(w)
    scores = 1.0 / (1.0 + np.exp(-4.0 * (matrix @ w)))

    records = []
    ids = []
    for i in range(n):
        rid = f"syn-{i:05d}"
        ids.append(rid)
        records.append(
            PaperRecord(
                id=rid,
                title=f"Synthetic paper {i}",
                abstract=f"Synthetic abstract {i}.",
                published_at=start + timedelta(days=i % 365),
                score=float(scores[i]),
                topic_phrase=f"topic-{i % 16}",
            )
        )
    return Corpus(records=records), ids, matrix
