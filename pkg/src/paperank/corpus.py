"""Corpus ingestion, review-score aggregation, and train/validation splitting."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from datetime import date
from pathlib import Path
from typing import Iterable

import numpy as np

VALID_SPLITS = ("train", "validation", "test")

# scores are checked against re-aggregated raw review scores at this tolerance
_SCORE_ATOL = 1e-9


class CorpusError(ValueError):
    """Raised for any corpus-file violation; carries the offending line."""

    def __init__(self, message: str, line: int | None = None, field_name: str | None = None):
        self.line = line
        self.field_name = field_name
        prefix = f"line {line}: " if line is not None else ""
        if field_name:
            prefix += f"field '{field_name}': "
        super().__init__(prefix + message)


@dataclass(frozen=True)
class PaperRecord:
    id: str
    title: str
    abstract: str
    published_at: date
    score: float
    topic_phrase: str | None = None
    raw_review_scores: tuple[float, ...] | None = None


@dataclass
class Corpus:
    """An immutable-by-convention ordered collection of papers with split tags."""

    records: list[PaperRecord]
    splits: dict[str, str] = field(default_factory=dict)  # id -> train/validation/test

    def __post_init__(self):
        for r in self.records:
            self.splits.setdefault(r.id, "train")

    def __len__(self) -> int:
        return len(self.records)

    def ids(self) -> list[str]:
        return [r.id for r in self.records]

    def by_id(self, rid: str) -> PaperRecord:
        return self._index()[rid]

    def _index(self) -> dict[str, PaperRecord]:
        return {r.id: r for r in self.records}

    def subset(self, split: str) -> list[PaperRecord]:
        if split not in VALID_SPLITS:
            raise ValueError(f"unknown split tag {split!r}")
        return [r for r in self.records if self.splits[r.id] == split]


def aggregate_review_scores(raw: Iterable[float]) -> float:
    """Collapse reviewer scores on a 1-10 scale into one score in [0, 1].

    Scores further than 3 points from the plain mean are dropped (one pass),
    the survivors are averaged, and the result is mapped by (v - 1) / 9.
    """
    raw = [float(x) for x in raw]
    if not raw:
        raise ValueError("raw review score list is empty")
    mu = sum(raw) / len(raw)
    kept = [x for x in raw if abs(x - mu) <= 3.0]
    v = sum(kept) / len(kept) if kept else mu
    return (v - 1.0) / 9.0


def _parse_record(obj: dict, line: int) -> PaperRecord:
    def need(name: str, kind):
        if name not in obj:
            raise CorpusError("missing required field", line, name)
        value = obj[name]
        if not isinstance(value, kind):
            raise CorpusError(f"expected {kind.__name__}, got {type(value).__name__}", line, name)
        return value

    rid = need("id", str)
    title = need("title", str)
    abstract = need("abstract", str)
    raw_date = need("published_at", str)
    try:
        published = date.fromisoformat(raw_date)
    except ValueError as exc:
        raise CorpusError(f"unparseable ISO-8601 date {raw_date!r}", line, "published_at") from exc

    if "score" not in obj:
        raise CorpusError("missing required field", line, "score")
    score = obj["score"]
    if not isinstance(score, (int, float)) or isinstance(score, bool):
        raise CorpusError("score must be a number", line, "score")
    score = float(score)
    if not math.isfinite(score) or not 0.0 <= score <= 1.0:
        raise CorpusError(f"score {score} outside [0, 1]", line, "score")

    topic = obj.get("topic_phrase")
    if topic is not None and not isinstance(topic, str):
        raise CorpusError("topic_phrase must be a string", line, "topic_phrase")

    raw_scores = obj.get("raw_review_scores")
    if raw_scores is not None:
        if not isinstance(raw_scores, list) or not raw_scores:
            raise CorpusError("raw_review_scores must be a non-empty array", line, "raw_review_scores")
        try:
            raw_scores = tuple(float(x) for x in raw_scores)
        except (TypeError, ValueError) as exc:
            raise CorpusError("raw_review_scores must be numbers", line, "raw_review_scores") from exc
        expected = aggregate_review_scores(raw_scores)
        if abs(expected - score) > _SCORE_ATOL:
            raise CorpusError(
                f"score {score} disagrees with aggregated review scores ({expected:.6f})",
                line,
                "score",
            )

    return PaperRecord(
        id=rid,
        title=title,
        abstract=abstract,
        published_at=published,
        score=score,
        topic_phrase=topic,
        raw_review_scores=raw_scores,
    )


def ingest_corpus(path: str | Path) -> Corpus:
    """Read a UTF-8 JSONL corpus file, rejecting it on the first violation."""
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"corpus file not found: {path}")
    records: list[PaperRecord] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"malformed JSON: {exc.msg}", line_no) from exc
            if not isinstance(obj, dict):
                raise CorpusError("each line must be a JSON object", line_no)
            record = _parse_record(obj, line_no)
            if record.id in seen:
                raise CorpusError(f"duplicate id {record.id!r}", line_no, "id")
            seen.add(record.id)
            records.append(record)
    return Corpus(records=records)


def persist_corpus(corpus: Corpus, path: str | Path, sidecar: str | Path | None = None) -> None:
    """Write the corpus back as JSONL plus an optional validation-id sidecar."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for r in corpus.records:
            obj: dict = {
                "id": r.id,
                "title": r.title,
                "abstract": r.abstract,
                "published_at": r.published_at.isoformat(),
                "score": r.score,
            }
            if r.topic_phrase is not None:
                obj["topic_phrase"] = r.topic_phrase
            if r.raw_review_scores is not None:
                obj["raw_review_scores"] = list(r.raw_review_scores)
            fh.write(json.dumps(obj, sort_keys=True) + "\n")
    if sidecar is not None:
        validation_ids = [rid for rid, tag in corpus.splits.items() if tag == "validation"]
        Path(sidecar).write_text(
            json.dumps({"validation_ids": sorted(validation_ids)}, indent=2) + "\n",
            encoding="utf-8",
        )


def load_split_sidecar(corpus: Corpus, path: str | Path) -> Corpus:
    """Apply a `{"validation_ids": [...]}` sidecar to a corpus."""
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    ids = set(obj["validation_ids"])
    unknown = ids - set(corpus.ids())
    if unknown:
        raise CorpusError(f"sidecar names unknown ids: {sorted(unknown)[:5]}")
    splits = dict(corpus.splits)
    for rid in ids:
        splits[rid] = "validation"
    return Corpus(records=list(corpus.records), splits=splits)


def split_validation(corpus: Corpus, fraction: float, seed: int) -> Corpus:
    """Retag a deterministic fraction of train records as validation.

    The validation count is round-half-to-even of fraction * n_train; the
    same (corpus, fraction, seed) always produces the same tagging.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"validation fraction must be in (0, 1), got {fraction}")
    train_ids = [r.id for r in corpus.records if corpus.splits[r.id] == "train"]
    n_val = _round_half_even(fraction * len(train_ids))
    rng = np.random.default_rng(seed)
    chosen = set(np.array(train_ids, dtype=object)[rng.permutation(len(train_ids))[:n_val]])
    splits = dict(corpus.splits)
    for rid in train_ids:
        splits[rid] = "validation" if rid in chosen else "train"
    return Corpus(records=list(corpus.records), splits=splits)


def _round_half_even(x: float) -> int:
    floor = math.floor(x)
    frac = x - floor
    if frac > 0.5:
        return floor + 1
    if frac < 0.5:
        return floor
    return floor if floor % 2 == 0 else floor + 1


def with_topic(record: PaperRecord, topic: str) -> PaperRecord:
    return replace(record, topic_phrase=topic)
