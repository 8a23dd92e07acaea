"""paperank: listwise learning-to-rank for scoring and filtering paper corpora."""

from .corpus import Corpus, PaperRecord, aggregate_review_scores, ingest_corpus, split_validation
from .losses import BatchScores, TemperaturePlan, score_distribution, temperature
from .metrics import RankingEval, kendall_tau, ndcg_at_k, spearman_rho
from .model import ModelParams, RefinementTrace, forward, init_params, predict
from .retrieval import EmbeddingIndex, ReferenceSet, build_index, cosine_similarity, retrieve_references
from .trainer import Checkpoint, TrainConfig, TrainResult, check_gradients, evaluate, train

__version__ = "0.1.0"

__all__ = [
    "Corpus",
    "PaperRecord",
    "aggregate_review_scores",
    "ingest_corpus",
    "split_validation",
    "BatchScores",
    "TemperaturePlan",
    "score_distribution",
    "temperature",
    "RankingEval",
    "kendall_tau",
    "ndcg_at_k",
    "spearman_rho",
    "ModelParams",
    "RefinementTrace",
    "forward",
    "init_params",
    "predict",
    "EmbeddingIndex",
    "ReferenceSet",
    "build_index",
    "cosine_similarity",
    "retrieve_references",
    "Checkpoint",
    "TrainConfig",
    "TrainResult",
    "check_gradients",
    "evaluate",
    "train",
]
