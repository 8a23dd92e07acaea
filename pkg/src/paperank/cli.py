"""Command-line entry point wiring corpus, retrieval, model, and training."""

from __future__ import annotations

import csv
import json
import sys
from datetime import date
from pathlib import Path

import click
import numpy as np

from . import corpus as corpus_mod
from . import model as model_mod
from . import reporting
from .corpus import CorpusError, ingest_corpus, load_split_sidecar, persist_corpus, split_validation
from .losses import LossError
from .metrics import MetricError
from .model import ModelError, load_checkpoint, save_checkpoint
from .retrieval import (
    RetrievalError,
    build_index,
    read_embeddings,
    write_embeddings,
)
from .synthetic import make_synthetic
from .trainer import (
    Checkpoint,
    ConfigError,
    TrainConfig,
    TrainingError,
    check_gradients,
    evaluate,
    reference_cache,
    predict_scores,
    step_diagnostic,
    train,
)

INPUT_ERRORS = (
    CorpusError,
    RetrievalError,
    ModelError,
    LossError,
    MetricError,
    ConfigError,
    reporting.ReportError,
)

_CONFIG_FLAGS = [
    click.option("--config", "config_path", type=click.Path(), default=None, help="Flat key=value config file."),
    click.option("--seed", type=int, default=None),
    click.option("--loss", "loss_variant", type=str, default=None),
    click.option("--m", "steps", type=int, default=None, help="Refinement step count."),
    click.option("--k", "references", type=int, default=None, help="Reference papers per target."),
    click.option("--gamma", type=float, default=None, help="Cosine similarity threshold."),
    click.option("--batch", "batch_size", type=int, default=None),
    click.option("--tau-min", type=float, default=None),
    click.option("--tau-max", type=float, default=None),
    click.option("--lr", "learning_rate", type=float, default=None),
    click.option("--epochs", type=int, default=None),
    click.option("--hidden-dim", type=int, default=None),
    click.option("--raw-listmle", is_flag=True, default=None),
    click.option("--clip", type=float, default=None),
    click.option("--past-only", is_flag=True, default=None),
]


def _with_config_flags(fn):
    for flag in reversed(_CONFIG_FLAGS):
        fn = flag(fn)
    return fn


def _build_config(config_path, **overrides) -> TrainConfig:
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if config_path:
        return TrainConfig.from_file(config_path, **overrides)
    return TrainConfig.from_mapping(overrides)


def _load_inputs(corpus_path, embeddings_base, sidecar=None):
    corpus = ingest_corpus(corpus_path)
    if sidecar:
        corpus = load_split_sidecar(corpus, sidecar)
    ids, matrix = read_embeddings(embeddings_base)
    return corpus, ids, matrix


@click.group()
def cli():
    """Rank and filter paper corpora with a latent-refinement scoring model."""


@cli.command()
@click.argument("corpus_path", type=click.Path())
@click.option("--out", type=click.Path(), default=None, help="Write a normalized copy.")
def ingest(corpus_path, out):
    """Validate a JSONL corpus file."""
    corpus = ingest_corpus(corpus_path)
    if out:
        persist_corpus(corpus, out)
    click.echo(f"ok: {len(corpus)} records")


@cli.command("embed-import")
@click.argument("embeddings_base", type=click.Path())
@click.option("--corpus", "corpus_path", type=click.Path(), required=True)
def embed_import(embeddings_base, corpus_path):
    """Validate an embedding file pair against a corpus."""
    corpus, ids, matrix = _load_inputs(corpus_path, embeddings_base)
    build_index(corpus, matrix, ids)
    click.echo(f"ok: {matrix.shape[0]} vectors of dim {matrix.shape[1]}")


@cli.command()
@click.option("--corpus", "corpus_path", type=click.Path(), required=True)
@click.option("--embeddings", "embeddings_base", type=click.Path(), required=True)
@click.option("--out", type=click.Path(), required=True, help="Output embedding base path.")
def index(corpus_path, embeddings_base, out):
    """Build the unit-normalized index and persist it as an embedding pair."""
    corpus, ids, matrix = _load_inputs(corpus_path, embeddings_base)
    idx = build_index(corpus, matrix, ids)
    write_embeddings(out, list(idx.ids), idx.matrix)
    click.echo(f"ok: indexed {len(idx)} vectors of dim {idx.dim}")


@cli.command()
@click.option("--corpus", "corpus_path", type=click.Path(), required=True)
@click.option("--fraction", type=float, default=0.1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True, help="Validation-id sidecar JSON.")
def split(corpus_path, fraction, seed, out):
    """Deterministically retag a fraction of train records as validation."""
    corpus = ingest_corpus(corpus_path)
    tagged = split_validation(corpus, fraction, seed)
    validation_ids = sorted(rid for rid, tag in tagged.splits.items() if tag == "validation")
    Path(out).write_text(json.dumps({"validation_ids": validation_ids}, indent=2) + "\n")
    click.echo(f"ok: {len(validation_ids)} validation records")


@cli.command("train")
@click.option("--corpus", "corpus_path", type=click.Path(), required=True)
@click.option("--embeddings", "embeddings_base", type=click.Path(), required=True)
@click.option("--splits", "sidecar", type=click.Path(), default=None, help="Validation-id sidecar.")
@click.option("--out", type=click.Path(), required=True, help="Checkpoint output path.")
@click.option("--log", "log_path", type=click.Path(), default=None, help="Per-epoch CSV log.")
@_with_config_flags
def train_cmd(corpus_path, embeddings_base, sidecar, out, log_path, config_path, **overrides):
    """Train the scoring model and keep the best validation checkpoint."""
    config = _build_config(config_path, **overrides)
    corpus, ids, matrix = _load_inputs(corpus_path, embeddings_base, sidecar)
    result = train(corpus, ids, matrix, config)
    _save_checkpoint_cmd(result.best, out)
    if log_path:
        with Path(log_path).open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "train_loss", "val_ndcg@10", "val_spearman", "wall_seconds"])
            for row in result.history:
                writer.writerow(
                    [
                        row.epoch,
                        repr(row.train_loss),
                        repr(row.val_ndcg10),
                        "degenerate" if row.val_spearman is None else repr(row.val_spearman),
                        f"{row.wall_seconds:.3f}",
                    ]
                )
    best_eval = result.best.validation_eval
    summary = best_eval.to_json() if best_eval else "no validation"
    click.echo(f"ok: best epoch {result.best.epoch}; validation {summary}")


def _save_checkpoint_cmd(checkpoint: Checkpoint, out: str) -> None:
    extra = {"epoch": checkpoint.epoch, "config_digest": checkpoint.config_digest}
    if checkpoint.validation_eval is not None:
        extra["validation"] = json.loads(checkpoint.validation_eval.to_json())
    save_checkpoint(checkpoint.params, out, extra=extra)


@cli.command("eval")
@click.option("--corpus", "corpus_path", type=click.Path(), required=True)
@click.option("--embeddings", "embeddings_base", type=click.Path(), required=True)
@click.option("--splits", "sidecar", type=click.Path(), default=None)
@click.option("--checkpoint", "checkpoint_path", type=click.Path(), required=True)
@click.option("--split", "split_tag", type=str, default=None, help="train/validation/test; default whole corpus.")
@click.option("--out", type=click.Path(), required=True, help="Metrics CSV path (JSON written alongside).")
@_with_config_flags
def eval_cmd(corpus_path, embeddings_base, sidecar, checkpoint_path, split_tag, out, config_path, **overrides):
    """Evaluate a checkpoint's final-step ranking over a corpus split."""
    config = _build_config(config_path, **overrides)
    corpus, ids, matrix = _load_inputs(corpus_path, embeddings_base, sidecar)
    params, _ = load_checkpoint(checkpoint_path)
    result = evaluate(params, corpus, ids, matrix, config, split=split_tag)
    out = Path(out)
    out.write_text(",".join(result.CSV_COLUMNS) + "\n" + result.to_csv_row() + "\n", encoding="utf-8")
    out.with_suffix(".json").write_text(result.to_json() + "\n", encoding="utf-8")
    click.echo(result.to_json())


@cli.command()
@click.option("--corpus", "corpus_path", type=click.Path(), required=True)
@click.option("--embeddings", "embeddings_base", type=click.Path(), required=True)
@click.option("--checkpoint", "checkpoint_path", type=click.Path(), required=True)
@click.option("--out", type=click.Path(), required=True, help="Ranking CSV path.")
@_with_config_flags
def rank(corpus_path, embeddings_base, checkpoint_path, out, config_path, **overrides):
    """Score the whole corpus and write (id, predicted_score, rank)."""
    config = _build_config(config_path, **overrides)
    corpus, ids, matrix = _load_inputs(corpus_path, embeddings_base)
    params, _ = load_checkpoint(checkpoint_path)
    idx = build_index(corpus, matrix, ids)
    all_ids = corpus.ids()
    refs = reference_cache(idx, config, all_ids)
    scores = predict_scores(params, idx, refs, all_ids)
    ordered = sorted(zip(all_ids, scores), key=lambda p: (-p[1], p[0]))
    with Path(out).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "predicted_score", "rank"])
        for position, (rid, score) in enumerate(ordered, start=1):
            writer.writerow([rid, repr(float(score)), position])
    click.echo(f"ok: ranked {len(ordered)} papers")


@cli.command()
@click.option("--corpus", "corpus_path", type=click.Path(), required=True)
@click.option("--embeddings", "embeddings_base", type=click.Path(), required=True)
@click.option("--checkpoint", "checkpoint_path", type=click.Path(), required=True)
@click.option("-n", "top_n", type=int, default=10, show_default=True)
@click.option("--date", "digest_date", type=str, default=None, help="ISO date stamp (default: today).")
@click.option("--out", type=click.Path(), required=True, help="Output base path (.json and .md).")
@_with_config_flags
def recommend(corpus_path, embeddings_base, checkpoint_path, top_n, digest_date, out, config_path, **overrides):
    """Top-n digest of the highest-scored papers with their reference sets."""
    if top_n < 1:
        raise ConfigError("n must be at least 1")
    config = _build_config(config_path, **overrides)
    corpus, ids, matrix = _load_inputs(corpus_path, embeddings_base)
    params, _ = load_checkpoint(checkpoint_path)
    idx = build_index(corpus, matrix, ids)
    all_ids = corpus.ids()
    refs = reference_cache(idx, config, all_ids)
    scores = predict_scores(params, idx, refs, all_ids)
    ordered = sorted(zip(all_ids, scores), key=lambda p: (-p[1], p[0]))[:top_n]
    stamp = digest_date if digest_date else date.today().isoformat()
    entries = [
        {
            "rank": position,
            "id": rid,
            "title": corpus.by_id(rid).title,
            "predicted_score": float(score),
            "reference_ids": refs[rid].ids(),
        }
        for position, (rid, score) in enumerate(ordered, start=1)
    ]
    digest = {"generated_at": stamp, "entries": entries}
    base = Path(out)
    base.with_suffix(".json").write_text(json.dumps(digest, indent=2) + "\n", encoding="utf-8")
    lines = [
        f"# Paper recommendations ({stamp})",
        "",
        "| rank | id | title | score | references |",
        "| --- | --- | --- | --- | --- |",
    ]
    for e in entries:
        refs_text = ", ".join(e["reference_ids"]) or "-"
        lines.append(
            f"| {e['rank']} | {e['id']} | {e['title']} | {e['predicted_score']:.4f} | {refs_text} |"
        )
    base.with_suffix(".md").write_text("\n".join(lines) + "\n", encoding="utf-8")
    click.echo(f"ok: digest of {len(entries)} papers")


@cli.command()
@click.option("--eval", "eval_csvs", type=click.Path(), multiple=True)
@click.option("--step", "step_csvs", type=click.Path(), multiple=True)
@click.option("--out", type=click.Path(), required=True, help="Markdown report path.")
def report(eval_csvs, step_csvs, out):
    """Assemble metric/step CSVs into a markdown report with figures."""
    path = reporting.write_report(list(eval_csvs), list(step_csvs), out)
    click.echo(f"ok: report at {path}")


@cli.command("step-diag")
@click.option("--corpus", "corpus_path", type=click.Path(), required=True)
@click.option("--embeddings", "embeddings_base", type=click.Path(), required=True)
@click.option("--splits", "sidecar", type=click.Path(), default=None)
@click.option("--checkpoint", "checkpoint_path", type=click.Path(), required=True)
@click.option("--split", "split_tag", type=str, default=None)
@click.option("--out", type=click.Path(), required=True, help="Per-step NDCG CSV.")
@_with_config_flags
def step_diag(corpus_path, embeddings_base, sidecar, checkpoint_path, split_tag, out, config_path, **overrides):
    """NDCG@10 of every refinement step's scores, step 0 through m."""
    config = _build_config(config_path, **overrides)
    corpus, ids, matrix = _load_inputs(corpus_path, embeddings_base, sidecar)
    params, _ = load_checkpoint(checkpoint_path)
    rows = step_diagnostic(params, corpus, ids, matrix, config, split=split_tag)
    with Path(out).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "ndcg@10"])
        for step_no, value in rows:
            writer.writerow([step_no, repr(value)])
    click.echo(f"ok: {len(rows)} steps")


@cli.command("grad-check")
@click.option("--epsilon", type=float, default=1e-5, show_default=True)
@click.option("--coords", type=int, default=200, show_default=True)
@_with_config_flags
def grad_check(epsilon, coords, config_path, **overrides):
    """Check analytic gradients against finite differences on a toy batch."""
    config = _build_config(config_path, **overrides)
    rng = np.random.default_rng(config.seed)
    dim = 8
    batch = max(config.batch_size if config.batch_size <= 8 else 4, 2)
    params = model_mod.init_params(
        embed_dim=dim,
        hidden_dim=config.hidden_dim if config.hidden_dim <= 16 else 8,
        steps=config.steps,
        scorer_layers=config.scorer_layers,
        seed=config.seed,
    )
    targets = [_unit(rng.standard_normal(dim)) for _ in range(batch)]
    references = [[_unit(rng.standard_normal(dim)) for _ in range(2)] for _ in range(batch)]
    truth = rng.uniform(0.0, 1.0, size=batch)
    worst = check_gradients(
        params, targets, references, truth, config, epsilon=epsilon, max_coords=coords
    )
    click.echo(f"max relative error: {worst:.3e}")
    if worst >= 1e-4:
        raise TrainingError(f"gradient check failed: max relative error {worst:.3e}")


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


@cli.command("make-synthetic")
@click.option("-n", "count", type=int, default=2000, show_default=True)
@click.option("--dim", type=int, default=32, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True, help="Base path for .jsonl corpus and embedding pair.")
def make_synthetic_cmd(count, dim, seed, out):
    """Generate a synthetic corpus and embedding pair for smoke runs."""
    corpus, ids, matrix = make_synthetic(n=count, dim=dim, seed=seed)
    base = Path(out)
    persist_corpus(corpus, base.with_suffix(".jsonl"))
    write_embeddings(base, ids, matrix)
    click.echo(f"ok: {count} synthetic papers at {base}.jsonl / .json / .bin")


def main() -> int:
    try:
        cli.main(standalone_mode=False)
    except click.exceptions.Abort:
        return 1
    except click.ClickException as exc:
        print(f"error: usage: {exc.format_message()}", file=sys.stderr)
        return 1
    except INPUT_ERRORS as exc:
        print(f"error: input: {exc}", file=sys.stderr)
        return 1
    except TrainingError as exc:
        print(f"error: numeric: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
