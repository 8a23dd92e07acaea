"""Command-line entry point for corpus preparation."""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .corpus_io import PrepError, read_corpus, write_corpus
from .encoder import DEFAULT_DIM, DEFAULT_ENCODER, load_encoder
from .export import TEXT_MODES, export_embeddings
from .topics import PROMPT_TEMPLATE, extract_topics


@click.group()
def cli():
    """Prepare a paper corpus: topic keyphrases and exported embeddings."""


@cli.command()
@click.option("--corpus", "corpus_path", type=click.Path(), required=True)
@click.option("--template", "template_path", type=click.Path(), default=None,
              help="Prompt template file with {title}/{abstract} slots; built-in default.")
@click.option("--endpoint", type=str, default=None, help="HTTP endpoint for keyphrase extraction.")
@click.option("--offline", is_flag=True, help="Use the deterministic first-noun-phrase fallback.")
@click.option("--out", type=click.Path(), default=None, help="Output corpus (default: in place).")
def topics(corpus_path, template_path, endpoint, offline, out):
    """Fill topic_phrase on every record that lacks one."""
    template = Path(template_path).read_text(encoding="utf-8") if template_path else PROMPT_TEMPLATE
    records = read_corpus(corpus_path)
    report = extract_topics(records, template, endpoint=endpoint, offline=offline)
    write_corpus(records, out or corpus_path)
    click.echo(f"ok: {report.filled} filled, {report.skipped} already present")
    if report.errors:
        for line in report.errors:
            click.echo(f"error: record {line}", err=True)
        click.echo(f"warning: {len(report.errors)} records failed", err=True)


@cli.command()
@click.option("--corpus", "corpus_path", type=click.Path(), required=True)
@click.option("--encoder", "encoder_id", type=str, default=DEFAULT_ENCODER, show_default=True)
@click.option("--dim", type=int, default=DEFAULT_DIM, show_default=True,
              help="Dimension for the hashing encoder; ignored by model encoders.")
@click.option("--text", "text_mode", type=click.Choice(TEXT_MODES), default="topic", show_default=True)
@click.option("--out", type=click.Path(), required=True, help="Output embedding base path.")
def embed(corpus_path, encoder_id, dim, text_mode, out):
    """Encode the corpus and export the embedding file pair plus a manifest."""
    records = read_corpus(corpus_path)
    encoder = load_encoder(encoder_id, dim)
    manifest = export_embeddings(records, encoder, out, corpus_path, text_mode=text_mode)
    click.echo(f"ok: {manifest.count} vectors of dim {manifest.dim} via {manifest.encoder}")


def main() -> int:
    try:
        cli.main(standalone_mode=False)
    except click.exceptions.Abort:
        return 1
    except click.ClickException as exc:
        print(f"error: usage: {exc.format_message()}", file=sys.stderr)
        return 1
    except PrepError as exc:
        print(f"error: input: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
