"""Command-line entry points for the adapter scripts."""

from __future__ import annotations

import json

import click

from .embeddings import NpzBackend, SpacyBackend, export_embeddings
from .predictions import AlignmentError, convert_predictions, read_alignments


@click.group()
def main():
    """Bridge model artifacts to the toolkit's canonical file formats."""


@main.command("export-embeddings")
@click.option("--npz", "npz_path", type=click.Path(exists=True), default=None,
              help="Archive with 'tokens' and 'vectors' arrays.")
@click.option("--spacy-model", default=None,
              help="Name of a locally installed spacy pipeline.")
@click.option("--vocab", "vocab_path", required=True, type=click.Path(exists=True),
              help="One token per line.")
@click.option("-o", "--output", required=True)
def export_embeddings_cmd(npz_path, spacy_model, vocab_path, output):
    """Write vectors for a vocabulary in the plain-text embedding format."""
    if (npz_path is None) == (spacy_model is None):
        raise click.ClickException("give exactly one of --npz / --spacy-model")
    try:
        backend = NpzBackend(npz_path) if npz_path else SpacyBackend(spacy_model)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    with open(vocab_path, encoding="utf-8") as fh:
        vocab = [line.strip() for line in fh if line.strip()]
    with open(output, "w", encoding="utf-8") as fh:
        n = export_embeddings(backend, vocab, fh)
    click.echo(f"wrote {n} vectors of dimension {backend.dimension}", err=True)


@main.command("convert")
@click.option("--outputs", "outputs_path", required=True, type=click.Path(exists=True),
              help="JSONL of raw model outputs (subword_labels or label).")
@click.option("--alignments", "align_path", type=click.Path(exists=True), default=None,
              help="JSONL of word-to-subword alignment maps.")
@click.option("-o", "--output", required=True)
def convert_cmd(outputs_path, align_path, output):
    """Convert classifier outputs into the predictions JSONL format."""
    alignments = {}
    if align_path:
        with open(align_path, encoding="utf-8") as fh:
            try:
                alignments = read_alignments(fh)
            except (AlignmentError, KeyError, json.JSONDecodeError) as exc:
                raise click.ClickException(f"{align_path}: {exc}")
    with open(outputs_path, encoding="utf-8") as fh:
        outputs = [json.loads(line) for line in fh if line.strip()]
    with open(output, "w", encoding="utf-8") as fh:
        try:
            n = convert_predictions(outputs, alignments, fh)
        except (AlignmentError, ValueError) as exc:
            raise click.ClickException(str(exc))
    click.echo(f"wrote {n} prediction records", err=True)


if __name__ == "__main__":
    main()
