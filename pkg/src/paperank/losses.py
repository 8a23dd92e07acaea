"""Training objectives: annealed score distributions and ranking losses.

Every loss sums a per-step term over the refinement steps j = 1..m, where the
softmax temperature for step j comes from a linearly decreasing schedule. The
listwise maximum-likelihood loss is the primary objective; the other variants
(ListNet KL, RankCosine, ApproxNDCG, RankNet pairs, final-step MSE) exist for
comparison runs.

The primary loss applies the Plackett-Luce likelihood to the *softmaxed*
scores, i.e. the weights are themselves a probability vector. Because the
Plackett-Luce probabilities are scale invariant in the weights, this is
mathematically identical to using exp(scores/tau) directly; the ``raw=True``
variant skips the inner normalization and differs only in float round-off.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .autodiff import Tensor, as_tensor, logsumexp, rev_logcumsumexp, softplus

LOSS_VARIANTS = ("listmle", "listnet", "rankcosine", "approxndcg", "ranknet", "mse")

_LN2 = float(np.log(2.0))


class LossError(ValueError):
    pass


@dataclass(frozen=True)
class TemperaturePlan:
    tau_min: float
    tau_max: float
    steps: int  # m

    def __post_init__(self):
        if not 0.0 < self.tau_min < self.tau_max:
            raise LossError(
                f"temperature bounds must satisfy 0 < tau_min < tau_max, "
                f"got ({self.tau_min}, {self.tau_max})"
            )
        if self.steps < 1:
            raise LossError("step count must be positive")


@dataclass(frozen=True)
class BatchScores:
    """Predicted per-step scores (B, m) and ground-truth scores (B,)."""

    predicted: np.ndarray
    truth: np.ndarray

    def __post_init__(self):
        pred = np.asarray(self.predicted, dtype=np.float64)
        truth = np.asarray(self.truth, dtype=np.float64)
        if pred.ndim != 2 or truth.ndim != 1 or pred.shape[0] != truth.shape[0]:
            raise LossError(f"inconsistent batch shapes {pred.shape} / {truth.shape}")
        if pred.shape[0] < 1:
            raise LossError("batch must contain at least one paper")
        if not (np.all(np.isfinite(pred)) and np.all(np.isfinite(truth))):
            raise LossError("batch contains non-finite values")
        if np.any(truth < 0.0) or np.any(truth > 1.0):
            raise LossError("ground-truth scores must lie in [0, 1]")
        object.__setattr__(self, "predicted", pred)
        object.__setattr__(self, "truth", truth)

    @property
    def batch_size(self) -> int:
        return self.predicted.shape[0]

    @property
    def steps(self) -> int:
        return self.predicted.shape[1]


def temperature(j: int, plan: TemperaturePlan) -> float:
    """Annealed temperature for step j: linear from tau_max down to tau_min."""
    if not 1 <= j <= plan.steps:
        raise LossError(f"step index {j} outside 1..{plan.steps}")
    if j == plan.steps:  # exact endpoint, immune to float round-off
        return plan.tau_min
    return plan.tau_max + (j / plan.steps) * (plan.tau_min - plan.tau_max)


def score_distribution(scores: np.ndarray, tau: float) -> np.ndarray:
    """Temperature softmax with max subtraction; strictly positive, sums to 1."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1 or scores.size < 1:
        raise LossError("scores must be a non-empty 1-D vector")
    if not np.all(np.isfinite(scores)):
        raise LossError("scores contain non-finite values")
    if tau <= 0.0:
        raise LossError(f"temperature must be positive, got {tau}")
    z = scores / tau
    z -= np.max(z)
    e = np.exp(z)
    return e / np.sum(e)


def ground_truth_permutation(truth: np.ndarray) -> np.ndarray:
    """Stable descending sort of the ground truth; returns 0-based indices."""
    truth = np.asarray(truth, dtype=np.float64)
    return np.argsort(-truth, kind="stable")


# -- tensor-level implementations (used by the trainer for gradients) -------


def _log_softmax(col: Tensor) -> Tensor:
    return col - logsumexp(col)


def listmle_progressive_t(
    pred: Tensor, truth: np.ndarray, plan: TemperaturePlan, raw: bool = False
) -> Tensor:
    order = ground_truth_permutation(truth)
    total: Tensor = as_tensor(0.0)
    for j in range(1, plan.steps + 1):
        scaled = pred[:, j - 1] / temperature(j, plan)
        logw = scaled if raw else _log_softmax(scaled)
        ordered = logw[order]
        total = total - (ordered - rev_logcumsumexp(ordered)).sum()
    return total


def listnet_kl_t(pred: Tensor, truth: np.ndarray, plan: TemperaturePlan) -> Tensor:
    total: Tensor = as_tensor(0.0)
    for j in range(1, plan.steps + 1):
        tau = temperature(j, plan)
        f = score_distribution(truth, tau)
        log_fhat = _log_softmax(pred[:, j - 1] / tau)
        entropy_term = float(np.sum(f * np.log(f)))
        total = total + (entropy_term - (as_tensor(f) * log_fhat).sum())
    return total


def rankcosine_t(pred: Tensor, truth: np.ndarray, plan: TemperaturePlan) -> Tensor:
    total: Tensor = as_tensor(0.0)
    for j in range(1, plan.steps + 1):
        tau = temperature(j, plan)
        f = score_distribution(truth, tau)
        fhat = _log_softmax(pred[:, j - 1] / tau).exp()
        cos = (fhat * f).sum() / ((fhat * fhat).sum().sqrt() * float(np.linalg.norm(f)))
        total = total + 0.5 * (1.0 - cos)
    return total


def _soft_rank(col: Tensor, tau: float) -> Tensor:
    """pi_i = 1 + sum_{t != i} sigmoid((s_t - s_i) / tau), with exact Jacobian."""
    x = col.data
    diff = (x[None, :] - x[:, None]) / tau  # [i, t]
    with np.errstate(over="ignore"):
        sig = np.where(diff >= 0, 1.0 / (1.0 + np.exp(-diff)), np.exp(diff) / (1.0 + np.exp(diff)))
    np.fill_diagonal(sig, 0.0)
    pi = 1.0 + sig.sum(axis=1)

    def backward(g):
        deriv = sig * (1.0 - sig) / tau  # d pi_i / d s_t for t != i
        jac = deriv.copy()
        np.fill_diagonal(jac, 0.0)
        np.fill_diagonal(jac, -jac.sum(axis=1))
        return (jac.T @ g,)

    return Tensor(pi, (col,), backward)


def _ideal_dcg(gains: np.ndarray, k: int | None = None) -> float:
    ordered = np.sort(gains)[::-1]
    if k is not None:
        ordered = ordered[:k]
    ranks = np.arange(1, ordered.size + 1)
    return float(np.sum(ordered / np.log2(ranks + 1)))


def approx_ndcg_t(
    pred: Tensor, truth: np.ndarray, plan: TemperaturePlan, relevance: np.ndarray | None = None
) -> Tensor:
    rel = np.asarray(truth if relevance is None else relevance, dtype=np.float64)
    gains = 2.0**rel - 1.0
    idcg = _ideal_dcg(gains)
    if idcg == 0.0:  # all relevances zero: defined as loss 0 per step
        return as_tensor(0.0)
    total: Tensor = as_tensor(0.0)
    for j in range(1, plan.steps + 1):
        pi = _soft_rank(pred[:, j - 1], temperature(j, plan))
        dcg = (as_tensor(gains) / ((1.0 + pi).log() / _LN2)).sum()
        total = total + (1.0 - dcg / idcg)
    return total


def ranknet_pairwise_t(pred: Tensor, truth: np.ndarray, plan: TemperaturePlan) -> Tensor:
    truth = np.asarray(truth, dtype=np.float64)
    hi, lo = np.nonzero(truth[:, None] > truth[None, :])
    if hi.size == 0:  # all ground-truth scores tied: no pairs, loss 0
        return as_tensor(0.0)
    total: Tensor = as_tensor(0.0)
    for j in range(1, plan.steps + 1):
        col = pred[:, j - 1]
        margin = (col[hi] - col[lo]) / temperature(j, plan)
        total = total + softplus(-margin).sum()
    return total


def mse_final_t(pred: Tensor, truth: np.ndarray) -> Tensor:
    final = pred[:, pred.shape[1] - 1]
    return ((final - as_tensor(np.asarray(truth, dtype=np.float64))) ** 2).mean()


# -- public numeric API ------------------------------------------------------


def listmle_progressive(batch: BatchScores, plan: TemperaturePlan, raw: bool = False) -> float:
    return _finite(listmle_progressive_t(Tensor(batch.predicted), batch.truth, plan, raw=raw))


def listnet_kl(batch: BatchScores, plan: TemperaturePlan) -> float:
    return _finite(listnet_kl_t(Tensor(batch.predicted), batch.truth, plan))


def rankcosine(batch: BatchScores, plan: TemperaturePlan) -> float:
    return _finite(rankcosine_t(Tensor(batch.predicted), batch.truth, plan))


def approx_ndcg(batch: BatchScores, plan: TemperaturePlan, relevance: np.ndarray | None = None) -> float:
    return _finite(approx_ndcg_t(Tensor(batch.predicted), batch.truth, plan, relevance=relevance))


def ranknet_pairwise(batch: BatchScores, plan: TemperaturePlan) -> float:
    return _finite(ranknet_pairwise_t(Tensor(batch.predicted), batch.truth, plan))


def mse_final(batch: BatchScores) -> float:
    return _finite(mse_final_t(Tensor(batch.predicted), batch.truth))


def _finite(value: Tensor) -> float:
    out = float(value.data)
    if not np.isfinite(out):
        raise LossError("non-finite loss value")
    return out


def loss_fn(variant: str, raw_listmle: bool = False) -> Callable[[Tensor, np.ndarray, TemperaturePlan], Tensor]:
    """Tensor-level loss selected by config token."""
    if variant == "listmle":
        return lambda pred, truth, plan: listmle_progressive_t(pred, truth, plan, raw=raw_listmle)
    if variant == "listnet":
        return listnet_kl_t
    if variant == "rankcosine":
        return rankcosine_t
    if variant == "approxndcg":
        return approx_ndcg_t
    if variant == "ranknet":
        return ranknet_pairwise_t
    if variant == "mse":
        return lambda pred, truth, plan: mse_final_t(pred, truth)
    raise LossError(f"unknown loss variant {variant!r}; expected one of {LOSS_VARIANTS}")
