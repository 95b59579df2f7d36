"""Command-line entry points for the two ingest tools."""

from __future__ import annotations

import argparse
import sys

from .embeddings import export_embedding_subset, read_vocabulary
from .features import extract_image_features


def features_main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="ingest-features",
        description="Extract per-image features into the pipeline feature-file format.",
    )
    parser.add_argument("--images", required=True, help="directory of images")
    parser.add_argument("--model", required=True, help="pixel-grid, pixel-stats or torchvision:<name>")
    parser.add_argument("--layer", required=True, help="layer name, e.g. gray8, moments, classifier.4")
    parser.add_argument("--out", required=True, metavar="PREFIX", help="output path prefix")
    parser.add_argument("--untrained", action="store_true", help="skip pretrained weights (debug only)")
    args = parser.parse_args(argv)
    try:
        manifest, payload = extract_image_features(
            args.images, args.model, args.layer, args.out, pretrained=not args.untrained
        )
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {manifest} and {payload}")
    return 0


def embeddings_main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="ingest-embeddings",
        description="Export a word2vec-format vector subset for a tag vocabulary.",
    )
    parser.add_argument("--source", required=True, help="word2vec text export to draw from")
    parser.add_argument("--vocab", required=True, help="file with one tag per line")
    parser.add_argument("--out", required=True, help="output word2vec text file")
    parser.add_argument("--missing-out", help="sidecar for unresolved tags")
    args = parser.parse_args(argv)
    try:
        count, missing = export_embedding_subset(
            args.source, read_vocabulary(args.vocab), args.out, args.missing_out
        )
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"exported {count} vectors, {len(missing)} missing")
    return 0


if __name__ == "__main__":
    sys.exit(features_main())
