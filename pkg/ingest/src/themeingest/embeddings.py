"""Word-vector subset export in word2vec text format.

Reads a large pretrained word2vec text export and writes the subset
covering a tag vocabulary. Tags the source cannot supply are listed on
stderr and in a sidecar file so downstream loading can account for them.
"""

from __future__ import annotations

import os
import sys
from pathlib import Path
from typing import Iterable


def read_vocabulary(path: str | Path) -> list[str]:
    """One tag per line; blanks ignored, lowercased, order preserved."""
    seen = []
    for line in Path(path).read_text().splitlines():
        tag = line.strip().lower()
        if tag and tag not in seen:
            seen.append(tag)
    if not seen:
        raise ValueError(f"vocabulary file {path} holds no tags")
    return seen


def export_embedding_subset(
    source: str | Path,
    vocabulary: Iterable[str],
    out_path: str | Path,
    sidecar_path: str | Path | None = None,
) -> tuple[int, frozenset[str]]:
    """Write the source vectors for the requested tags; report the rest.

    Matching is lowercase-exact, first occurrence wins. Fails if no tag
    resolves at all. Returns (exported count, missing tag set).
    """
    source = Path(source)
    wanted = {t.strip().lower() for t in vocabulary}
    if not wanted:
        raise ValueError("empty vocabulary")

    found: dict[str, str] = {}
    with source.open() as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{source.name}: expected 'count dim' header")
        dim = int(header[1])
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split(" ")
            if not line.strip():
                continue
            word = parts[0].lower()
            if len(parts) - 1 != dim:
                raise ValueError(
                    f"{source.name}:{lineno}: {len(parts) - 1} coordinates, header declares {dim}"
                )
            if word in wanted and word not in found:
                found[word] = " ".join(parts[1:])

    if not found:
        raise ValueError(f"none of the {len(wanted)} vocabulary tags appear in {source}")

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{len(found)} {dim}"]
    lines += [f"{word} {found[word]}" for word in sorted(found)]
    tmp = out_path.with_name(out_path.name + ".tmp")
    tmp.write_text("\n".join(lines) + "\n")
    os.replace(tmp, out_path)

    missing = frozenset(wanted - set(found))
    sidecar = Path(sidecar_path) if sidecar_path else out_path.with_suffix(out_path.suffix + ".missing")
    sidecar.write_text("\n".join(sorted(missing)) + ("\n" if missing else ""))
    if missing:
        print(
            f"{len(missing)} tag(s) missing from {source.name}: "
            + ", ".join(sorted(missing)[:10]),
            file=sys.stderr,
        )
    return len(found), missing
