"""Corpus data model and file I/O.

Three inputs drive everything downstream: a dense matrix of per-image
visual features, a bidirectional tag/image annotation index, and a table
of word vectors covering the tag vocabulary. All three are immutable
after load and share one canonical image ordering (feature-matrix row
order); nothing in the package ever reorders rows.

File formats:
    features      ``<name>.json`` manifest + ``<name>.bin`` little-endian float32
    annotations   JSON lines, one ``{"image_id": ..., "tags": [...]}`` per line
    word vectors  word2vec text: header ``"N D"``, then ``"word v1 ... vD"`` lines

Features are stored as 32-bit floats on disk and widened to 64-bit for
all computation. A seeded synthetic-corpus generator provides planted
cluster structure for desk-scale tests.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np


@dataclass(frozen=True)
class FeatureMatrix:
    """Row-per-image dense visual features in canonical image order."""

    data: np.ndarray
    image_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ValueError(f"feature data must be 2-D, got shape {data.shape}")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError(f"feature matrix must be at least 1x1, got {data.shape}")
        if not np.isfinite(data).all():
            raise ValueError("feature matrix contains non-finite values")
        if len(self.image_ids) != data.shape[0]:
            raise ValueError(
                f"{len(self.image_ids)} image ids for {data.shape[0]} feature rows"
            )
        if len(set(self.image_ids)) != len(self.image_ids):
            raise ValueError("duplicate image ids")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "image_ids", tuple(self.image_ids))

    @property
    def num_images(self) -> int:
        return self.data.shape[0]

    @property
    def num_dims(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class AnnotationIndex:
    """Bidirectional tag/image incidence over a fixed image ordering.

    ``tag_to_images`` and ``image_to_tags`` are exact transposes; tags are
    lowercased, distinct, and kept in sorted order so tag indices are
    stable. Images without tags simply have no ``image_to_tags`` entry.
    """

    num_images: int
    tags: tuple[str, ...]
    tag_to_images: dict[str, tuple[int, ...]]
    image_to_tags: dict[int, tuple[int, ...]]

    def __post_init__(self) -> None:
        if self.num_images < 1:
            raise ValueError("annotation index needs at least one image")
        if list(self.tags) != sorted(set(self.tags)):
            raise ValueError("tags must be sorted and distinct")
        positions = {t: i for i, t in enumerate(self.tags)}
        for tag, images in self.tag_to_images.items():
            if tag not in positions:
                raise ValueError(f"unlisted tag {tag!r} in tag_to_images")
            if not images:
                raise ValueError(f"tag {tag!r} has an empty image set")
            if list(images) != sorted(set(images)):
                raise ValueError(f"image set for {tag!r} not sorted/distinct")
            if images[0] < 0 or images[-1] >= self.num_images:
                raise ValueError(f"image index out of range for tag {tag!r}")
        rebuilt: dict[int, set[int]] = {}
        for tag, images in self.tag_to_images.items():
            for img in images:
                rebuilt.setdefault(img, set()).add(positions[tag])
        forward = {img: tuple(sorted(ts)) for img, ts in rebuilt.items()}
        if forward != dict(self.image_to_tags):
            raise ValueError("image_to_tags is not the transpose of tag_to_images")
        object.__setattr__(self, "_tag_positions", positions)
        object.__setattr__(
            self, "_image_tag_sets", {img: frozenset(ts) for img, ts in forward.items()}
        )

    @classmethod
    def build(cls, num_images: int, image_tag_pairs: Iterable[tuple[int, str]]) -> "AnnotationIndex":
        """Construct from (image index, raw tag) pairs, normalizing tags."""
        by_tag: dict[str, set[int]] = {}
        for img, raw in image_tag_pairs:
            tag = raw.strip().lower()
            if not tag:
                raise ValueError(f"empty tag for image {img}")
            if img < 0 or img >= num_images:
                raise ValueError(f"image index {img} out of range")
            by_tag.setdefault(tag, set()).add(img)
        tags = tuple(sorted(by_tag))
        tag_to_images = {t: tuple(sorted(by_tag[t])) for t in tags}
        positions = {t: i for i, t in enumerate(tags)}
        by_image: dict[int, set[int]] = {}
        for tag, images in tag_to_images.items():
            for img in images:
                by_image.setdefault(img, set()).add(positions[tag])
        image_to_tags = {img: tuple(sorted(ts)) for img, ts in sorted(by_image.items())}
        return cls(num_images, tags, tag_to_images, image_to_tags)

    @property
    def num_tags(self) -> int:
        return len(self.tags)

    def tag_position(self, tag: str) -> int:
        return self._tag_positions[tag]  # type: ignore[attr-defined]

    def has_tag(self, tag: str) -> bool:
        return tag in self._tag_positions  # type: ignore[attr-defined]

    def images_of(self, tag: str) -> tuple[int, ...]:
        return self.tag_to_images[tag]

    def tags_of(self, image: int) -> tuple[int, ...]:
        return self.image_to_tags.get(image, ())

    def image_has_tag(self, image: int, tag_index: int) -> bool:
        return tag_index in self._image_tag_sets.get(image, frozenset())  # type: ignore[attr-defined]

    def incidence(self) -> np.ndarray:
        """Boolean (num_images, num_tags) membership matrix."""
        out = np.zeros((self.num_images, self.num_tags), dtype=bool)
        for j, tag in enumerate(self.tags):
            out[list(self.tag_to_images[tag]), j] = True
        return out


@dataclass(frozen=True)
class WordVectorTable:
    """Tag to embedding-vector mapping with one shared dimensionality."""

    dim: int
    entries: dict[str, np.ndarray]

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("embedding dimension must be >= 1")
        fixed = {}
        for word, vec in self.entries.items():
            arr = np.asarray(vec, dtype=np.float64)
            if arr.shape != (self.dim,):
                raise ValueError(f"vector for {word!r} has shape {arr.shape}, want ({self.dim},)")
            if not np.isfinite(arr).all():
                raise ValueError(f"vector for {word!r} contains non-finite values")
            if not arr.any():
                raise ValueError(f"vector for {word!r} is all-zero")
            fixed[word] = arr
        object.__setattr__(self, "entries", fixed)

    def __contains__(self, word: str) -> bool:
        return word in self.entries

    def vector(self, word: str) -> np.ndarray:
        return self.entries[word]


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters for the planted-cluster synthetic corpus generator."""

    num_clusters: int
    images_per_cluster: int
    dims: int
    tags_per_cluster: int
    noise_sigma: float
    seed: int

    def __post_init__(self) -> None:
        for name in ("num_clusters", "images_per_cluster", "dims", "tags_per_cluster"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


# ---------------------------------------------------------------------------
# feature files


def load_feature_matrix(path: str | Path) -> FeatureMatrix:
    """Load a feature matrix from its JSON manifest and binary payload.

    The manifest declares shape, dtype (only ``f32le``), storage order
    (only ``row-major``), the payload filename, and the image id list.
    The payload must contain exactly ``num_images * num_dims`` values.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"feature manifest not found: {path}")
    manifest = json.loads(path.read_text())
    for key in ("num_images", "num_dims", "dtype", "order", "data", "image_ids"):
        if key not in manifest:
            raise ValueError(f"feature manifest missing key {key!r}")
    if manifest["dtype"] != "f32le":
        raise ValueError(f"unsupported feature dtype {manifest['dtype']!r}")
    if manifest["order"] != "row-major":
        raise ValueError(f"unsupported storage order {manifest['order']!r}")
    n, d = int(manifest["num_images"]), int(manifest["num_dims"])
    payload_path = path.parent / manifest["data"]
    if not payload_path.exists():
        raise FileNotFoundError(f"feature payload not found: {payload_path}")
    payload = payload_path.read_bytes()
    if len(payload) != n * d * 4:
        raise ValueError(
            f"feature payload holds {len(payload) // 4} values, manifest declares {n * d}"
        )
    raw = np.frombuffer(payload, dtype="<f4")
    if not np.isfinite(raw).all():
        raise ValueError("feature payload contains non-finite values")
    ids = manifest["image_ids"]
    if len(ids) != n:
        raise ValueError(f"{len(ids)} image ids for {n} declared images")
    return FeatureMatrix(raw.astype(np.float64).reshape(n, d), tuple(str(i) for i in ids))


def write_feature_matrix(matrix: FeatureMatrix, path: str | Path) -> None:
    """Write manifest + float32 payload; round-trips bit-exactly through load."""
    path = Path(path)
    bin_name = path.stem + ".bin"
    manifest = {
        "num_images": matrix.num_images,
        "num_dims": matrix.num_dims,
        "dtype": "f32le",
        "order": "row-major",
        "data": bin_name,
        "image_ids": list(matrix.image_ids),
    }
    (path.parent / bin_name).write_bytes(matrix.data.astype("<f4").tobytes())
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# annotation files


def load_annotations(path: str | Path, image_ids: Sequence[str]) -> AnnotationIndex:
    """Load a JSON-lines annotation file against a known image id ordering.

    Tags are lowercased; duplicates within one image collapse. Lines
    referencing ids outside ``image_ids`` are an error, as are empty tags.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"annotation file not found: {path}")
    id_to_index = {img_id: i for i, img_id in enumerate(image_ids)}
    pairs: list[tuple[int, str]] = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path.name}:{lineno}: malformed JSON line: {exc}") from exc
        if not isinstance(record, dict) or "image_id" not in record or "tags" not in record:
            raise ValueError(f"{path.name}:{lineno}: expected {{'image_id', 'tags'}} object")
        image_id = record["image_id"]
        if image_id not in id_to_index:
            raise ValueError(f"{path.name}:{lineno}: unknown image id {image_id!r}")
        tags = record["tags"]
        if not isinstance(tags, list) or not all(isinstance(t, str) for t in tags):
            raise ValueError(f"{path.name}:{lineno}: tags must be a list of strings")
        for tag in tags:
            if not tag.strip():
                raise ValueError(f"{path.name}:{lineno}: empty tag")
            pairs.append((id_to_index[image_id], tag))
    return AnnotationIndex.build(len(image_ids), pairs)


def write_annotations(index: AnnotationIndex, image_ids: Sequence[str], path: str | Path) -> None:
    """Write one JSON line per annotated image, in canonical image order."""
    if len(image_ids) != index.num_images:
        raise ValueError("image id list does not match annotation index size")
    lines = []
    for img in sorted(index.image_to_tags):
        tags = [index.tags[t] for t in index.image_to_tags[img]]
        lines.append(json.dumps({"image_id": image_ids[img], "tags": tags}))
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


# ---------------------------------------------------------------------------
# word vector files


def load_word_vectors(
    path: str | Path, vocabulary: Iterable[str]
) -> tuple[WordVectorTable, frozenset[str]]:
    """Load word2vec-format text vectors for a requested vocabulary.

    Returns the table restricted to tags that resolved to a vector, plus
    the set of requested tags that did not. Matching is lowercase-exact;
    a multi-word tag absent from the file falls back to the average of
    its constituent words' vectors when at least one is present.
    All-zero vectors are unusable for cosine and are treated as missing.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"word vector file not found: {path}")
    wanted = {tag.strip().lower() for tag in vocabulary}
    needed_words = set(wanted)
    for tag in wanted:
        needed_words.update(tag.split())

    with path.open() as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path.name}: expected 'count dim' header, got {header!r}")
        try:
            declared_count, dim = int(header[0]), int(header[1])
        except ValueError as exc:
            raise ValueError(f"{path.name}: unparsable header {header!r}") from exc
        found: dict[str, np.ndarray] = {}
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2 and not line.strip():
                continue
            word = parts[0].lower()
            coords = parts[1:]
            if len(coords) != dim:
                raise ValueError(
                    f"{path.name}:{lineno}: {len(coords)} coordinates, header declares {dim}"
                )
            if word not in needed_words or word in found:
                continue
            try:
                vec = np.array([float(c) for c in coords], dtype=np.float64)
            except ValueError as exc:
                raise ValueError(f"{path.name}:{lineno}: unparsable number") from exc
            found[word] = vec

    entries: dict[str, np.ndarray] = {}
    zeroed: list[str] = []
    for tag in sorted(wanted):
        vec = found.get(tag)
        if vec is None and " " in tag:
            parts_present = [found[w] for w in tag.split() if w in found]
            if parts_present:
                vec = np.mean(parts_present, axis=0)
        if vec is None:
            continue
        if not vec.any():
            zeroed.append(tag)
            continue
        entries[tag] = vec
    if zeroed:
        warnings.warn(f"dropping all-zero word vectors for: {', '.join(zeroed)}")
    missing = frozenset(wanted - set(entries))
    del declared_count  # informational only; actual line count governs
    return WordVectorTable(dim, entries), missing


def write_word_vectors(table: WordVectorTable, path: str | Path) -> None:
    """Write word2vec text format, one line per word in sorted order."""
    lines = [f"{len(table.entries)} {table.dim}"]
    for word in sorted(table.entries):
        coords = " ".join(repr(float(v)) for v in table.entries[word])
        lines.append(f"{word} {coords}")
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# synthetic corpus


def _cluster_directions(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    """One unit direction per cluster; axis-aligned while dims allow."""
    directions = np.zeros((spec.num_clusters, spec.dims))
    for c in range(spec.num_clusters):
        if c < spec.dims:
            directions[c, c] = 1.0
        else:
            v = rng.standard_normal(spec.dims)
            directions[c] = v / np.linalg.norm(v)
    return directions


def generate_synthetic_corpus(
    spec: SyntheticSpec,
) -> tuple[FeatureMatrix, AnnotationIndex, WordVectorTable]:
    """Generate a deterministic corpus with planted cluster structure.

    Cluster ``c`` gets ``images_per_cluster`` images Gaussian-distributed
    around a distinct, well-separated center, and ``tags_per_cluster``
    tags that each annotate exactly that cluster's images. Word vectors
    of same-cluster tags are small perturbations of one shared direction,
    with distinct directions across clusters. Identical specs produce
    identical bytes.
    """
    rng = np.random.default_rng(spec.seed)
    directions = _cluster_directions(spec, rng)
    centers = directions * (10.0 * (np.arange(spec.num_clusters) + 1))[:, None]

    num_images = spec.num_clusters * spec.images_per_cluster
    noise = rng.standard_normal((num_images, spec.dims)) * spec.noise_sigma
    data = np.repeat(centers, spec.images_per_cluster, axis=0) + noise
    data = data.astype(np.float32).astype(np.float64)  # survive f32 disk round-trip
    image_ids = tuple(f"img{i:04d}" for i in range(num_images))
    features = FeatureMatrix(data, image_ids)

    pairs = []
    for c in range(spec.num_clusters):
        members = range(c * spec.images_per_cluster, (c + 1) * spec.images_per_cluster)
        for t in range(spec.tags_per_cluster):
            tag = f"tag{c:02d}_{t:02d}"
            pairs.extend((img, tag) for img in members)
    annotations = AnnotationIndex.build(num_images, pairs)

    embed_dim = max(8, spec.num_clusters)
    basis, _ = np.linalg.qr(rng.standard_normal((embed_dim, embed_dim)))
    entries = {}
    for c in range(spec.num_clusters):
        for t in range(spec.tags_per_cluster):
            v = basis[:, c] + 0.02 * rng.standard_normal(embed_dim)
            entries[f"tag{c:02d}_{t:02d}"] = v / np.linalg.norm(v)
    vectors = WordVectorTable(embed_dim, entries)
    return features, annotations, vectors


def planted_tag_clusters(annotations: AnnotationIndex) -> dict[str, int]:
    """Recover the planted cluster id from synthetic tag names."""
    out = {}
    for tag in annotations.tags:
        if not tag.startswith("tag") or "_" not in tag:
            raise ValueError(f"{tag!r} is not a synthetic corpus tag")
        out[tag] = int(tag[3 : tag.index("_")])
    return out
