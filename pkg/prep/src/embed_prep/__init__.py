"""Offline corpus preparation: topic keyphrases and embedding export.

This tool talks to the ranking toolkit only through its documented file
formats: the JSONL corpus on the input side and the `<name>.json`/`<name>.bin`
embedding pair on the output side.
"""

from .corpus_io import PrepError, read_corpus, write_corpus
from .encoder import HashingEncoder, load_encoder
from .export import ExportManifest, export_embeddings
from .topics import PROMPT_TEMPLATE, extract_topics, first_noun_phrase, render_prompt

__version__ = "0.1.0"

__all__ = [
    "PrepError",
    "read_corpus",
    "write_corpus",
    "HashingEncoder",
    "load_encoder",
    "ExportManifest",
    "export_embeddings",
    "PROMPT_TEMPLATE",
    "extract_topics",
    "first_noun_phrase",
    "render_prompt",
    "__version__",
]
