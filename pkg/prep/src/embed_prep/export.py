"""Embedding export in the ranking toolkit's documented file-pair format.

`<name>.json` carries {dim, count, dtype: "f32", order: "row-major", ids} and
`<name>.bin` carries count x dim little-endian float32 values, row-major, in
the same id order as the corpus. A manifest JSON records provenance.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .corpus_io import PrepError

TEXT_MODES = ("topic", "title-abstract")


@dataclass(frozen=True)
class ExportManifest:
    corpus: str
    encoder: str
    dim: int
    count: int
    text_mode: str
    prompt_template_id: str
    header_path: str
    blob_path: str

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _record_text(record: dict, mode: str) -> str:
    if mode == "topic":
        topic = record.get("topic_phrase")
        if not isinstance(topic, str) or not topic.strip():
            raise PrepError(
                f"record {record['id']!r} has no topic_phrase; run the topics "
                f"step first or use --text title-abstract"
            )
        return topic
    if mode == "title-abstract":
        return f"{record['title']}\n\n{record['abstract']}"
    raise PrepError(f"unknown text mode {mode!r}; expected one of {TEXT_MODES}")


def export_embeddings(
    records: list[dict],
    encoder,
    out_base: str | Path,
    corpus_path: str | Path,
    text_mode: str = "topic",
    prompt_template_id: str = "topic-extraction-v1",
) -> ExportManifest:
    """Encode every record and write the .json/.bin pair plus a manifest."""
    if not records:
        raise PrepError("cannot export an empty corpus")
    texts = [_record_text(r, text_mode) for r in records]
    matrix = np.asarray(encoder.encode(texts), dtype=np.float64)
    if matrix.shape != (len(records), encoder.dim):
        raise PrepError(f"encoder produced shape {matrix.shape}, expected ({len(records)}, {encoder.dim})")
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise PrepError("encoder produced a zero vector")
    matrix = np.ascontiguousarray((matrix / norms).astype("<f4"))

    base = Path(out_base)
    ids = [r["id"] for r in records]
    header = {
        "dim": int(matrix.shape[1]),
        "count": int(matrix.shape[0]),
        "dtype": "f32",
        "order": "row-major",
        "ids": ids,
    }
    base.with_suffix(".json").write_text(json.dumps(header) + "\n", encoding="utf-8")
    base.with_suffix(".bin").write_bytes(matrix.tobytes())

    manifest = ExportManifest(
        corpus=str(corpus_path),
        encoder=encoder.identifier,
        dim=int(matrix.shape[1]),
        count=int(matrix.shape[0]),
        text_mode=text_mode,
        prompt_template_id=prompt_template_id,
        header_path=str(base.with_suffix(".json")),
        blob_path=str(base.with_suffix(".bin")),
    )
    manifest.write(base.parent / (base.name + ".manifest.json"))
    return manifest
