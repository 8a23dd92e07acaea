"""Topic keyphrase extraction: prompt rendering, endpoint calls, offline fallback."""

from __future__ import annotations

import json
import re
import urllib.error
import urllib.request
from dataclasses import dataclass, field

from .corpus_io import PrepError

PROMPT_TEMPLATE = (
    "Given the title and abstract below, determine the specific research field "
    "by focusing on the main application area and the key technology. "
    "You MUST respond with the keyword ONLY in this format: xxx.\n"
    "Title: {title}\n"
    "Abstract: {abstract}"
)

# words that carry no topical content when they lead a title
_STOPWORDS = frozenset(
    """a an the on of for with via and or to in from towards toward using by
    is are does do can how what why when revisiting rethinking understanding
    improving learning""".split()
)

_WORD = re.compile(r"[A-Za-z][A-Za-z0-9-]*")


@dataclass
class TopicReport:
    filled: int = 0
    skipped: int = 0  # already had a topic_phrase
    errors: list[str] = field(default_factory=list)  # "id: reason" per failure


def render_prompt(record: dict, template: str = PROMPT_TEMPLATE) -> str:
    try:
        return template.format(title=record["title"], abstract=record["abstract"])
    except (KeyError, IndexError) as exc:
        raise PrepError(f"prompt template expects {{title}} and {{abstract}}: {exc}") from exc


def first_noun_phrase(title: str, max_words: int = 4) -> str:
    """Deterministic offline fallback: the leading content-word chunk of the title."""
    words = _WORD.findall(title)
    content = [w for w in words if w.lower() not in _STOPWORDS]
    phrase = " ".join((content or words)[:max_words]).strip()
    return phrase if phrase else "general research"


def _call_endpoint(endpoint: str, prompt: str, timeout: float = 30.0) -> str:
    payload = json.dumps({"prompt": prompt}).encode("utf-8")
    request = urllib.request.Request(
        endpoint, data=payload, headers={"Content-Type": "application/json"}
    )
    with urllib.request.urlopen(request, timeout=timeout) as response:
        body = json.loads(response.read().decode("utf-8"))
    text = body.get("text") if isinstance(body, dict) else None
    if not isinstance(text, str) or not text.strip():
        raise PrepError("endpoint returned no usable text")
    return text.strip().splitlines()[0].strip()


def extract_topics(
    records: list[dict],
    template: str = PROMPT_TEMPLATE,
    endpoint: str | None = None,
    offline: bool = False,
) -> TopicReport:
    """Fill topic_phrase on every record in place; already-filled records are untouched.

    Per-record endpoint failures are collected in the report and the run
    continues with the remaining records.
    """
    if not offline and not endpoint:
        raise PrepError("either an endpoint or --offline is required")
    report = TopicReport()
    for record in records:
        existing = record.get("topic_phrase")
        if isinstance(existing, str) and existing.strip():
            report.skipped += 1
            continue
        if offline:
            record["topic_phrase"] = first_noun_phrase(record["title"])
            report.filled += 1
            continue
        prompt = render_prompt(record, template)
        try:
            record["topic_phrase"] = _call_endpoint(endpoint, prompt)
            report.filled += 1
        except (PrepError, urllib.error.URLError, json.JSONDecodeError, TimeoutError, OSError) as exc:
            report.errors.append(f"{record['id']}: {exc}")
    return report
