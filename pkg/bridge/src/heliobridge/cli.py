"""Command line for feature export: folder of images in, FEAT1 file out."""

from __future__ import annotations

import sys

import click

from .errors import BridgeError
from .extractors import EXTRACTOR_NAMES, ExtractorSpec, extract_folder


@click.command(name="helio-extract")
@click.option("--in", "in_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--extractor", required=True, type=click.Choice(EXTRACTOR_NAMES))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--seed", type=int, default=0, show_default=True,
              help="Weight seed for inception-random.")
@click.option("--resize", type=int, default=None,
              help="Input side length; defaults to the backbone's native size.")
@click.option("--batch", type=int, default=16, show_default=True)
@click.option("--colormap", default=None,
              help="Apply a matplotlib colormap instead of gray replication.")
def main(in_dir, extractor, out_path, checkpoint, seed, resize, batch, colormap):
    """Export one embedding row per image into a FEAT1 feature file."""
    spec = ExtractorSpec(
        name=extractor,
        checkpoint=checkpoint,
        resize=resize,
        channel_policy=f"cmap:{colormap}" if colormap else "gray3",
        seed=seed,
        batch_size=batch,
    )
    try:
        count, dim = extract_folder(in_dir, spec, out_path)
    except BridgeError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(3)
    click.echo(f"{spec.extractor_id}: {count} rows x {dim} -> {out_path}")


if __name__ == "__main__":
    main()
