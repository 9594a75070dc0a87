"""`embed` command: corpus JSONL in, binary embedding matrix out."""

from __future__ import annotations

import sys

import click

from .encode import EncoderResolutionError, NonFiniteOutput, embed_corpus


@click.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--model", required=True, help="hash:<dim> or a sentence-transformers id")
@click.option("--pooling", type=click.Choice(["mean", "cls"]), default="mean",
              show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def main(corpus_path: str, model: str, pooling: str, out_path: str) -> None:
    """Encode each corpus line; writes OUT and OUT.meta.json."""
    try:
        meta = embed_corpus(corpus_path, model, pooling, out_path)
    except (EncoderResolutionError, NonFiniteOutput, ValueError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(
        f"wrote {meta['count']} x {meta['dim']} embeddings "
        f"({meta['model']}, {meta['pooling']} pooling) to {out_path}"
    )


if __name__ == "__main__":
    main()
