"""Reading and writing the JSONL corpus format.

Records are kept as plain dicts so fields this tool does not know about
(review scores, split tags added by other tools) survive a round trip
untouched.
"""

from __future__ import annotations

import json
from pathlib import Path

REQUIRED_FIELDS = ("id", "title", "abstract", "published_at", "score")


class PrepError(ValueError):
    pass


def read_corpus(path: str | Path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise PrepError(f"corpus file not found: {path}")
    records: list[dict] = []
    seen: set[str] = set()
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise PrepError(f"line {line_no}: malformed JSON: {exc.msg}") from exc
        if not isinstance(obj, dict):
            raise PrepError(f"line {line_no}: each line must be a JSON object")
        for name in REQUIRED_FIELDS:
            if name not in obj:
                raise PrepError(f"line {line_no}: missing required field {name!r}")
        if obj["id"] in seen:
            raise PrepError(f"line {line_no}: duplicate id {obj['id']!r}")
        seen.add(obj["id"])
        records.append(obj)
    return records


def write_corpus(records: list[dict], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for obj in records:
            fh.write(json.dumps(obj, sort_keys=True) + "\n")
