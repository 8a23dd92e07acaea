"""Batch construction, SGD training, gradient checking, and evaluation."""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .autodiff import Tensor, stack
from .corpus import Corpus, split_validation
from .losses import LOSS_VARIANTS, TemperaturePlan, loss_fn
from .metrics import RankingEval, ndcg_at_k, ranking_eval
from .model import (
    ModelParams,
    ParamTensors,
    forward_tensors,
    init_params,
)
from .retrieval import EmbeddingIndex, ReferenceSet, build_index, retrieve_references

RANKING_LOSSES = tuple(v for v in LOSS_VARIANTS if v != "mse")


class ConfigError(ValueError):
    """Bad configuration or inputs; a user-correctable problem."""


class TrainingError(RuntimeError):
    """Numeric failure during training (divergent or non-finite loss)."""


@dataclass
class TrainConfig:
    loss_variant: str = "listmle"
    steps: int = 8  # reasoning steps m
    references: int = 2  # retrieved reference count k
    batch_size: int = 16
    gamma: float = 0.5
    tau_min: float = 0.1
    tau_max: float = 1.0
    learning_rate: float = 5e-5
    epochs: int = 5
    seed: int = 0
    hidden_dim: int = 64
    validation_fraction: float = 0.1
    selection_metric: str = "ndcg@10"
    scorer_layers: int = 1
    raw_listmle: bool = False
    clip: float = 0.0  # gradient-norm clip; 0 disables
    past_only: bool = False

    def validate(self) -> None:
        if self.loss_variant not in LOSS_VARIANTS:
            raise ConfigError(f"unknown loss variant {self.loss_variant!r}")
        if not 0.0 < self.tau_min < self.tau_max:
            raise ConfigError("need 0 < tau_min < tau_max")
        min_batch = 2 if self.loss_variant in RANKING_LOSSES else 1
        if self.batch_size < min_batch:
            raise ConfigError(
                f"batch size {self.batch_size} too small for loss {self.loss_variant!r}"
            )
        for name in ("steps", "references", "epochs", "hidden_dim"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.learning_rate < 0.0:  # zero is allowed: a deliberate no-op run
            raise ConfigError("learning rate must not be negative")

    def plan(self) -> TemperaturePlan:
        return TemperaturePlan(tau_min=self.tau_min, tau_max=self.tau_max, steps=self.steps)

    def digest(self) -> str:
        return hashlib.sha256(
            json.dumps(asdict(self), sort_keys=True).encode("utf-8")
        ).hexdigest()

    # -- flat key=value config files --------------------------------------

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "TrainConfig":
        values: dict = {}
        for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"config line {line_no}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_mapping(values)

    @classmethod
    def from_mapping(cls, values: dict) -> "TrainConfig":
        config = cls()
        for key, value in values.items():
            if not hasattr(config, key):
                raise ConfigError(f"unknown config key {key!r}")
            current = getattr(config, key)
            if isinstance(current, bool):
                value = value if isinstance(value, bool) else value.lower() in ("1", "true", "yes")
            elif isinstance(current, int):
                value = int(value)
            elif isinstance(current, float):
                value = float(value)
            setattr(config, key, value)
        config.validate()
        return config


@dataclass
class Checkpoint:
    params: ModelParams
    epoch: int
    validation_eval: RankingEval | None
    config_digest: str


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_ndcg10: float
    val_spearman: float | None
    wall_seconds: float


@dataclass
class TrainResult:
    best: Checkpoint
    history: list[EpochStats]
    snapshots: dict[int, ModelParams] = field(default_factory=dict)


def make_batches(
    ids: list[str], batch_size: int, seed: int, epoch: int, drop_singletons: bool = True
) -> list[list[str]]:
    """Deterministic per-epoch shuffle into batches of at most batch_size."""
    if not ids:
        raise ConfigError("cannot batch an empty corpus")
    if batch_size < 1:
        raise ConfigError("batch size must be positive")
    rng = np.random.default_rng([seed, epoch])
    order = rng.permutation(len(ids))
    shuffled = [ids[i] for i in order]
    batches = [shuffled[i : i + batch_size] for i in range(0, len(shuffled), batch_size)]
    if drop_singletons:
        batches = [b for b in batches if len(b) >= 2]
    return batches


def reference_cache(
    index: EmbeddingIndex, config: TrainConfig, ids: list[str] | None = None
) -> dict[str, ReferenceSet]:
    """Reference sets are computed once per run; embeddings are frozen."""
    ids = list(index.ids) if ids is None else ids
    return {
        rid: retrieve_references(
            rid, index, config.gamma, config.references, past_only=config.past_only
        )
        for rid in ids
    }


def _batch_prediction(
    pt: ParamTensors,
    index: EmbeddingIndex,
    refs: dict[str, ReferenceSet],
    batch_ids: list[str],
) -> Tensor:
    """Forward a whole batch; returns the (B, m) per-step score tensor."""
    rows = []
    for rid in batch_ids:
        ref_embs = [index.vector(r) for r in refs[rid].ids()]
        _, scores = forward_tensors(index.vector(rid), ref_embs, pt)
        rows.append(stack(scores[1:]))  # steps 1..m are supervised
    return stack(rows)


def predict_scores(
    params: ModelParams,
    index: EmbeddingIndex,
    refs: dict[str, ReferenceSet],
    ids: list[str],
    step: int | None = None,
) -> np.ndarray:
    """Final-step scores (or an arbitrary step's, for diagnostics)."""
    pt = ParamTensors(params)
    out = np.empty(len(ids), dtype=np.float64)
    j = params.steps if step is None else step
    for i, rid in enumerate(ids):
        ref_embs = [index.vector(r) for r in refs[rid].ids()]
        _, scores = forward_tensors(index.vector(rid), ref_embs, pt)
        out[i] = float(scores[j].data)
    return out


def train(
    corpus: Corpus,
    ids: list[str],
    matrix: np.ndarray,
    config: TrainConfig,
    snapshot_epochs: tuple[int, ...] = (),
) -> TrainResult:
    """Full training run; returns the best-validation checkpoint and history."""
    config.validate()
    index = build_index(corpus, matrix, ids)

    if not any(tag == "validation" for tag in corpus.splits.values()):
        corpus = split_validation(corpus, config.validation_fraction, config.seed)
    train_ids = [r.id for r in corpus.subset("train")]
    val_ids = [r.id for r in corpus.subset("validation")]
    if not train_ids:
        raise ConfigError("no training records")
    truth = {r.id: r.score for r in corpus.records}

    refs = reference_cache(index, config)
    params = init_params(
        embed_dim=index.dim,
        hidden_dim=config.hidden_dim,
        steps=config.steps,
        scorer_layers=config.scorer_layers,
        seed=config.seed,
    )
    pt = ParamTensors(params)
    objective = loss_fn(config.loss_variant, raw_listmle=config.raw_listmle)
    plan = config.plan()
    drop_singletons = config.loss_variant in RANKING_LOSSES

    best: Checkpoint | None = None
    history: list[EpochStats] = []
    snapshots: dict[int, ModelParams] = {}

    for epoch in range(1, config.epochs + 1):
        start = time.perf_counter()
        epoch_losses: list[float] = []
        batches = make_batches(train_ids, config.batch_size, config.seed, epoch, drop_singletons)
        for batch_no, batch_ids in enumerate(batches, start=1):
            pt.zero_grad()
            pred = _batch_prediction(pt, index, refs, batch_ids)
            batch_truth = np.array([truth[rid] for rid in batch_ids])
            loss = objective(pred, batch_truth, plan)
            value = float(loss.data)
            if not np.isfinite(value):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, batch {batch_no}: {value}"
                )
            loss.backward()
            pt.sgd_step(config.learning_rate, clip=config.clip)
            epoch_losses.append(value)

        epoch_params = pt.to_params()
        if epoch in snapshot_epochs:
            snapshots[epoch] = epoch_params.copy()

        val_eval: RankingEval | None = None
        if len(val_ids) >= 2:
            val_scores = predict_scores(epoch_params, index, refs, val_ids)
            val_eval = ranking_eval(val_scores, np.array([truth[rid] for rid in val_ids]))
        history.append(
            EpochStats(
                epoch=epoch,
                train_loss=float(np.mean(epoch_losses)) if epoch_losses else float("nan"),
                val_ndcg10=val_eval.ndcg[10] if val_eval else float("nan"),
                val_spearman=val_eval.spearman if val_eval else None,
                wall_seconds=time.perf_counter() - start,
            )
        )

        candidate = Checkpoint(
            params=epoch_params,
            epoch=epoch,
            validation_eval=val_eval,
            config_digest=config.digest(),
        )
        if best is None or (
            val_eval is not None
            and (
                best.validation_eval is None
                or val_eval.metric(config.selection_metric)
                > best.validation_eval.metric(config.selection_metric)
            )
        ):
            best = candidate

    assert best is not None
    return TrainResult(best=best, history=history, snapshots=snapshots)


def evaluate(
    params: ModelParams,
    corpus: Corpus,
    ids: list[str],
    matrix: np.ndarray,
    config: TrainConfig,
    split: str | None = None,
) -> RankingEval:
    """RankingEval of final-step predictions over a split (or the whole corpus)."""
    index = build_index(corpus, matrix, ids)
    records = corpus.records if split is None else corpus.subset(split)
    if len(records) < 2:
        raise ConfigError("evaluation needs at least 2 records")
    eval_ids = [r.id for r in records]
    refs = reference_cache(index, config, eval_ids)
    scores = predict_scores(params, index, refs, eval_ids)
    return ranking_eval(scores, np.array([r.score for r in records]))


def step_diagnostic(
    params: ModelParams,
    corpus: Corpus,
    ids: list[str],
    matrix: np.ndarray,
    config: TrainConfig,
    split: str | None = None,
    k: int = 10,
) -> list[tuple[int, float]]:
    """NDCG@k of every step's scores, step 0 (pre-refinement) through m."""
    index = build_index(corpus, matrix, ids)
    records = corpus.records if split is None else corpus.subset(split)
    if len(records) < 2:
        raise ConfigError("diagnostic needs at least 2 records")
    eval_ids = [r.id for r in records]
    refs = reference_cache(index, config, eval_ids)
    truth = np.array([r.score for r in records])
    rows = []
    for j in range(params.steps + 1):
        scores = predict_scores(params, index, refs, eval_ids, step=j)
        rows.append((j, ndcg_at_k(scores, truth, min(k, len(records)))))
    return rows


def check_gradients(
    params: ModelParams,
    target_embs: list[np.ndarray],
    reference_embs: list[list[np.ndarray]],
    truth: np.ndarray,
    config: TrainConfig,
    epsilon: float = 1e-5,
    max_coords: int = 200,
) -> float:
    """Worst relative error of analytic vs central finite-difference gradients.

    At least min(max_coords, total parameter count) coordinates are checked,
    sampled deterministically from the config seed.
    """
    if epsilon <= 0.0:
        raise ConfigError("epsilon must be positive")
    config.validate()
    objective = loss_fn(config.loss_variant, raw_listmle=config.raw_listmle)
    plan = config.plan()
    truth = np.asarray(truth, dtype=np.float64)

    def loss_value(p: ModelParams) -> float:
        pt = ParamTensors(p)
        rows = []
        for x, refs in zip(target_embs, reference_embs):
            _, scores = forward_tensors(x, refs, pt)
            rows.append(stack(scores[1:]))
        value = float(objective(stack(rows), truth, plan).data)
        if not np.isfinite(value):
            raise TrainingError("non-finite loss during gradient check")
        return value

    # analytic gradients
    pt = ParamTensors(params)
    rows = [stack(forward_tensors(x, refs, pt)[1][1:]) for x, refs in zip(target_embs, reference_embs)]
    objective(stack(rows), truth, plan).backward()
    analytic = {
        name: (t.grad if t.grad is not None else np.zeros_like(t.data))
        for name, t in pt.tensors.items()
    }

    coords = [
        (name, idx)
        for name, w in params.weights.items()
        for idx in np.ndindex(w.shape)
    ]
    rng = np.random.default_rng(config.seed)
    if len(coords) > max_coords:
        chosen = rng.choice(len(coords), size=max_coords, replace=False)
        coords = [coords[int(i)] for i in chosen]

    worst = 0.0
    probe = params.copy()
    for name, idx in coords:
        original = probe.weights[name][idx]
        probe.weights[name][idx] = original + epsilon
        plus = loss_value(probe)
        probe.weights[name][idx] = original - epsilon
        minus = loss_value(probe)
        probe.weights[name][idx] = original
        numeric = (plus - minus) / (2.0 * epsilon)
        exact = float(analytic[name][idx])
        scale = max(abs(exact), abs(numeric))
        if scale == 0.0:
            continue
        # the 1e-6 floor keeps sub-resolution gradients (below what a central
        # difference at this epsilon can measure) from registering as error
        worst = max(worst, abs(exact - numeric) / max(scale, 1e-6))
    return worst
