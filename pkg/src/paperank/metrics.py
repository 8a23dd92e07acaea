"""Ranking evaluation metrics: NDCG@K, Spearman's rho, Kendall's tau.

Conventions chosen for tied and continuous data:
  - NDCG relevance is the normalized truth score; gain 2^rel - 1; prediction
    ties are broken by ascending index; NDCG is 1 when the ideal DCG is 0.
  - Spearman uses average ranks and the Pearson correlation of the rank
    vectors (equals the classic d^2 formula when there are no ties); a
    constant vector makes it degenerate, reported as None rather than a number.
  - Kendall is tau-a: (C - D) / (n(n-1)/2), ties counting toward neither.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class RankingEval:
    n: int
    ndcg: dict[int, float] = field(default_factory=dict)  # K -> NDCG@K
    spearman: float | None = None  # None = degenerate (constant input)
    kendall: float | None = None

    CSV_COLUMNS = ("n", "ndcg@10", "ndcg@20", "spearman", "kendall")

    def metric(self, token: str) -> float:
        """Look up a metric by config token, e.g. 'ndcg@10' or 'spearman'."""
        if token.startswith("ndcg@"):
            return self.ndcg[int(token.split("@", 1)[1])]
        if token == "spearman":
            return self.spearman if self.spearman is not None else float("-inf")
        if token == "kendall":
            return self.kendall if self.kendall is not None else float("-inf")
        raise MetricError(f"unknown metric token {token!r}")

    def to_json(self) -> str:
        return json.dumps(
            {
                "n": self.n,
                "ndcg": {str(k): v for k, v in sorted(self.ndcg.items())},
                "spearman": self.spearman if self.spearman is not None else "degenerate",
                "kendall": self.kendall,
            },
            sort_keys=True,
        )

    def to_csv_row(self) -> str:
        buf = io.StringIO()
        spearman = "degenerate" if self.spearman is None else repr(self.spearman)
        values = (
            str(self.n),
            repr(self.ndcg.get(10, float("nan"))),
            repr(self.ndcg.get(20, float("nan"))),
            spearman,
            repr(self.kendall),
        )
        buf.write(",".join(values))
        return buf.getvalue()


def _check_pair(predicted, truth, min_n: int = 1) -> tuple[np.ndarray, np.ndarray]:
    predicted = np.asarray(predicted, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if predicted.shape != truth.shape or predicted.ndim != 1:
        raise MetricError(f"length mismatch: {predicted.shape} vs {truth.shape}")
    if predicted.size < min_n:
        raise MetricError(f"need at least {min_n} items, got {predicted.size}")
    return predicted, truth


def ndcg_at_k(predicted, truth, k: int) -> float:
    predicted, truth = _check_pair(predicted, truth)
    n = predicted.size
    if not 1 <= k <= n:
        raise MetricError(f"K={k} outside 1..{n}")
    # descending prediction, stable => ties broken by ascending index
    order = np.argsort(-predicted, kind="stable")
    gains = 2.0**truth - 1.0
    discounts = 1.0 / np.log2(np.arange(1, k + 1) + 1)
    dcg = float(np.sum(gains[order[:k]] * discounts))
    ideal = np.sort(gains)[::-1][:k]
    idcg = float(np.sum(ideal * discounts))
    if idcg == 0.0:
        return 1.0
    return dcg / idcg


def average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the average of their positions."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman_rho(predicted, truth) -> float | None:
    predicted, truth = _check_pair(predicted, truth, min_n=2)
    rp, rt = average_ranks(predicted), average_ranks(truth)
    sp, st = np.std(rp), np.std(rt)
    if sp == 0.0 or st == 0.0:
        return None
    return float(np.mean((rp - np.mean(rp)) * (rt - np.mean(rt))) / (sp * st))


def kendall_tau(predicted, truth) -> float:
    predicted, truth = _check_pair(predicted, truth, min_n=2)
    n = predicted.size
    dp = np.sign(predicted[:, None] - predicted[None, :])
    dt = np.sign(truth[:, None] - truth[None, :])
    prod = dp * dt
    upper = np.triu_indices(n, k=1)
    concordant = int(np.sum(prod[upper] > 0))
    discordant = int(np.sum(prod[upper] < 0))
    return (concordant - discordant) / (0.5 * n * (n - 1))


def ranking_eval(predicted, truth, ks: tuple[int, ...] = (10, 20)) -> RankingEval:
    """Full evaluation over one split; K values above n are clipped to n."""
    predicted, truth = _check_pair(predicted, truth, min_n=2)
    n = predicted.size
    ndcg = {k: ndcg_at_k(predicted, truth, min(k, n)) for k in ks}
    return RankingEval(
        n=n,
        ndcg=ndcg,
        spearman=spearman_rho(predicted, truth),
        kendall=kendall_tau(predicted, truth),
    )
