"""Spectral clustering of tags into visual themes.

The joint similarity matrix is treated as a weighted graph over tags.
Clustering uses the symmetric normalized Laplacian: embed tags into the
eigenvectors of the k smallest eigenvalues, row-normalize, and run a
deterministic k-means (seeded first centre, greedy farthest-point
completion, lowest-index tie-breaks). Empty clusters are repaired by
splitting the largest cluster at its farthest member, so the result is
always a full partition into nonempty themes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .corpus import AnnotationIndex
from .tagsim import SimilarityMatrix

_DEGREE_FLOOR = 1e-12  # keeps D^{-1/2} finite for isolated tags


@dataclass(frozen=True)
class ThemeAssignment:
    """Partition of the retained tags into themes."""

    num_themes: int
    theme_to_tags: dict[int, tuple[str, ...]]
    tag_to_theme: dict[str, int]

    def __post_init__(self) -> None:
        if set(self.theme_to_tags) != set(range(self.num_themes)):
            raise ValueError("theme ids must be exactly 0..num_themes-1")
        seen: set[str] = set()
        for theme, tags in self.theme_to_tags.items():
            if not tags:
                raise ValueError(f"theme {theme} is empty")
            for tag in tags:
                if tag in seen:
                    raise ValueError(f"tag {tag!r} assigned to multiple themes")
                if self.tag_to_theme.get(tag) != theme:
                    raise ValueError(f"tag_to_theme disagrees for {tag!r}")
                seen.add(tag)
        if seen != set(self.tag_to_theme):
            raise ValueError("tag_to_theme covers different tags than theme_to_tags")

    def to_json(self) -> str:
        payload = {
            "num_themes": self.num_themes,
            "themes": {str(t): list(tags) for t, tags in sorted(self.theme_to_tags.items())},
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ThemeAssignment":
        raw = json.loads(text)
        theme_to_tags = {int(t): tuple(tags) for t, tags in raw["themes"].items()}
        tag_to_theme = {tag: t for t, tags in theme_to_tags.items() for tag in tags}
        return cls(int(raw["num_themes"]), theme_to_tags, tag_to_theme)


@dataclass(frozen=True)
class ThemeCorpus:
    """Per-image theme sets induced by an assignment, with usage counts."""

    image_to_themes: dict[int, frozenset[int]]
    theme_frequencies: dict[int, int]

    def themes_of(self, image: int) -> frozenset[int]:
        return self.image_to_themes.get(image, frozenset())

    def to_json(self) -> str:
        payload = {
            "image_to_themes": {
                str(i): sorted(ts) for i, ts in sorted(self.image_to_themes.items())
            },
            "theme_frequencies": {
                str(t): c for t, c in sorted(self.theme_frequencies.items())
            },
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ThemeCorpus":
        raw = json.loads(text)
        return cls(
            {int(i): frozenset(ts) for i, ts in raw["image_to_themes"].items()},
            {int(t): int(c) for t, c in raw["theme_frequencies"].items()},
        )


def _normalized_laplacian(similarity: SimilarityMatrix) -> np.ndarray:
    weights = similarity.values.copy()
    np.fill_diagonal(weights, 0.0)
    degrees = np.maximum(weights.sum(axis=1), _DEGREE_FLOOR)
    inv_sqrt = 1.0 / np.sqrt(degrees)
    lap = -inv_sqrt[:, None] * weights * inv_sqrt[None, :]
    np.fill_diagonal(lap, 1.0)
    return lap


def _spectral_embedding(similarity: SimilarityMatrix, num_themes: int) -> np.ndarray:
    lap = _normalized_laplacian(similarity)
    try:
        _, vecs = np.linalg.eigh(lap)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"eigendecomposition failed to converge: {exc}") from exc
    emb = vecs[:, :num_themes]
    norms = np.maximum(np.linalg.norm(emb, axis=1), _DEGREE_FLOOR)
    return emb / norms[:, None]


def _kmeans(points: np.ndarray, k: int, rng: np.random.Generator, max_iter: int = 300) -> np.ndarray:
    n = points.shape[0]
    # seeded first centre, then greedy farthest-point completion
    centre_rows = [int(rng.integers(n))]
    d2 = ((points - points[centre_rows[0]]) ** 2).sum(axis=1)
    while len(centre_rows) < k:
        nxt = int(np.argmax(d2))
        centre_rows.append(nxt)
        d2 = np.minimum(d2, ((points - points[nxt]) ** 2).sum(axis=1))
    centres = points[centre_rows].copy()

    labels = np.full(n, -1, dtype=np.int64)
    for _ in range(max_iter):
        assign = cdist(points, centres, "sqeuclidean").argmin(axis=1)
        if np.array_equal(assign, labels):
            break
        labels = assign
        for j in range(k):
            members = labels == j
            if members.any():
                centres[j] = points[members].mean(axis=0)
    return labels


def _repair_empty_clusters(labels: np.ndarray, points: np.ndarray, k: int) -> np.ndarray:
    labels = labels.copy()
    while True:
        counts = np.bincount(labels, minlength=k)
        empties = np.flatnonzero(counts == 0)
        if empties.size == 0:
            return labels
        largest = int(np.argmax(counts))
        members = np.flatnonzero(labels == largest)
        centre = points[members].mean(axis=0)
        spread = ((points[members] - centre) ** 2).sum(axis=1)
        labels[members[int(np.argmax(spread))]] = int(empties[0])


def spectral_cluster(
    similarity: SimilarityMatrix, num_themes: int, seed: int
) -> ThemeAssignment:
    """Partition the matrix's tags into ``num_themes`` nonempty themes.

    Deterministic for a fixed seed. Theme ids are relabelled so that
    themes appear in order of their lexicographically smallest tag.
    """
    if similarity.kind == "visual-distance":
        raise ValueError("clustering needs a similarity matrix, not distances")
    n = len(similarity.tags)
    if num_themes < 2:
        raise ValueError("num_themes must be >= 2")
    if num_themes > n:
        raise ValueError(f"cannot split {n} tags into {num_themes} themes")
    embedding = _spectral_embedding(similarity, num_themes)
    rng = np.random.default_rng(seed)
    labels = _kmeans(embedding, num_themes, rng)
    labels = _repair_empty_clusters(labels, embedding, num_themes)

    groups: dict[int, list[str]] = {}
    for tag, label in zip(similarity.tags, labels):
        groups.setdefault(int(label), []).append(tag)
    ordered = sorted((sorted(tags) for tags in groups.values()), key=lambda ts: ts[0])
    theme_to_tags = {i: tuple(tags) for i, tags in enumerate(ordered)}
    tag_to_theme = {tag: i for i, tags in theme_to_tags.items() for tag in tags}
    return ThemeAssignment(num_themes, theme_to_tags, tag_to_theme)


def suggest_num_themes(similarity: SimilarityMatrix, max_themes: int | None = None) -> int:
    """Advisory theme count from the largest Laplacian eigengap."""
    n = len(similarity.tags)
    limit = min(max_themes or n, n)
    vals = np.linalg.eigvalsh(_normalized_laplacian(similarity))
    gaps = np.diff(vals[:limit])
    if gaps.size < 2:
        return min(2, limit)
    return int(np.argmax(gaps[1:]) + 2)  # gap after the k-th eigenvalue suggests k


def relabel_corpus(
    annotations: AnnotationIndex, themes: ThemeAssignment, min_frequency: int = 0
) -> ThemeCorpus:
    """Replace each image's retained tags with their themes.

    Themes occurring in fewer than ``min_frequency`` images of this
    annotation split are dropped from both the frequency table and the
    per-image sets. Images whose tags all fall outside the assignment
    simply get no entry.
    """
    image_to_themes: dict[int, set[int]] = {}
    for image, tag_indices in annotations.image_to_tags.items():
        present = {
            themes.tag_to_theme[annotations.tags[t]]
            for t in tag_indices
            if annotations.tags[t] in themes.tag_to_theme
        }
        if present:
            image_to_themes[image] = present
    frequencies: dict[int, int] = {}
    for theme_set in image_to_themes.values():
        for theme in theme_set:
            frequencies[theme] = frequencies.get(theme, 0) + 1
    keep = {t for t, c in frequencies.items() if c >= min_frequency}
    return ThemeCorpus(
        {
            img: frozenset(ts & keep)
            for img, ts in sorted(image_to_themes.items())
            if ts & keep
        },
        {t: frequencies[t] for t in sorted(keep)},
    )


def save_theme_assignment(themes: ThemeAssignment, path: str | Path) -> None:
    Path(path).write_text(themes.to_json())


def load_theme_assignment(path: str | Path) -> ThemeAssignment:
    return ThemeAssignment.from_json(Path(path).read_text())


def save_theme_corpus(corpus: ThemeCorpus, path: str | Path) -> None:
    Path(path).write_text(corpus.to_json())


def load_theme_corpus(path: str | Path) -> ThemeCorpus:
    return ThemeCorpus.from_json(Path(path).read_text())
