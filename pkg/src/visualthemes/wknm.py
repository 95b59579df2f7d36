"""Tag filtering by visual descriptive power.

A tag that describes visual content well has associated images that look
alike: each such image's nearest neighbours in feature space should carry
the tag again. One (tag, image) pair is scored by a rank-discounted count
of neighbour hits; the tag's visual content descriptive level (VCDL) is
the median of its per-image scores, and tags whose VCDL falls below a
threshold are dropped before theme discovery.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import AnnotationIndex, FeatureMatrix


@dataclass(frozen=True)
class NeighborList:
    """K nearest neighbours of one image by cosine distance, nearest first.

    ``k`` is the requested neighbour count and fixes the rank discount,
    even when the corpus is too small to supply that many neighbours.
    """

    query_image: int
    k: int
    neighbors: tuple[tuple[int, float], ...]

    def __post_init__(self) -> None:
        dists = [d for _, d in self.neighbors]
        if any(b < a for a, b in zip(dists, dists[1:])):
            raise ValueError("neighbour distances must be nondecreasing")
        if any(i == self.query_image for i, _ in self.neighbors):
            raise ValueError("query image may not appear in its own neighbour list")


@dataclass(frozen=True)
class VcdlReport:
    """Per-tag VCDL scores for one corpus at one neighbour count."""

    k_used: int
    per_tag: dict[str, float]

    def to_json(self) -> str:
        return json.dumps(
            {"k": self.k_used, "vcdl": {t: self.per_tag[t] for t in sorted(self.per_tag)}},
            indent=2,
            sort_keys=True,
        ) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "VcdlReport":
        raw = json.loads(text)
        return cls(int(raw["k"]), {str(t): float(v) for t, v in raw["vcdl"].items()})


@dataclass(frozen=True)
class FilterResult:
    """Outcome of thresholding a VCDL report."""

    threshold: float
    retained: tuple[str, ...]
    removed: dict[str, float]


def _unit_rows(features: FeatureMatrix) -> np.ndarray:
    norms = np.linalg.norm(features.data, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ValueError(f"zero-norm feature row(s) at indices {zero.tolist()[:5]}")
    return features.data / norms[:, None]


def _rank_weights(requested_k: int, available: int) -> np.ndarray:
    return 1.0 - np.arange(available, dtype=np.float64) / requested_k


def knn_images(features: FeatureMatrix, query: int, k: int) -> NeighborList:
    """Exact k nearest neighbours of one image by cosine distance.

    The query is excluded from its own list; equidistant neighbours are
    ordered by ascending image index. Requests larger than the corpus
    allows are truncated to ``num_images - 1``.
    """
    n = features.num_images
    if not 0 <= query < n:
        raise ValueError(f"query index {query} out of range")
    if k < 1:
        raise ValueError("k must be >= 1")
    unit = _unit_rows(features)
    dist = 1.0 - unit @ unit[query]
    order = np.lexsort((np.arange(n), dist))
    order = order[order != query][: min(k, n - 1)]
    return NeighborList(query, k, tuple((int(i), float(dist[i])) for i in order))


def neighbor_index(features: FeatureMatrix, k: int, chunk: int = 512) -> np.ndarray:
    """(num_images, min(k, n-1)) matrix of neighbour indices, nearest first.

    Row ``i`` matches ``knn_images(features, i, k)`` exactly; computed in
    chunks so corpora of a few thousand images stay cheap.
    """
    n = features.num_images
    if k < 1:
        raise ValueError("k must be >= 1")
    unit = _unit_rows(features)
    width = min(k, n - 1)
    out = np.empty((n, width), dtype=np.int64)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        dist = 1.0 - unit[start:stop] @ unit.T
        for row in range(start, stop):
            d = dist[row - start]
            order = np.lexsort((np.arange(n), d))
            out[row] = order[order != row][:width]
    return out


def image_tag_score(
    tag: int, image: int, neighbors: NeighborList, annotations: AnnotationIndex
) -> float:
    """Rank-discounted count of the image's neighbours that carry the tag.

    Rank r (1-based) contributes ``1 - (r-1)/k`` when the neighbour's
    annotation contains the tag, so the score lives in [0, (k+1)/2].
    """
    if neighbors.query_image != image:
        raise ValueError("neighbour list was computed for a different image")
    if not annotations.image_has_tag(image, tag):
        raise ValueError(
            f"image {image} is not annotated with tag {annotations.tags[tag]!r}"
        )
    hits = np.array(
        [annotations.image_has_tag(i, tag) for i, _ in neighbors.neighbors], dtype=np.float64
    )
    return float(_rank_weights(neighbors.k, hits.size) @ hits)


def vcdl(tag: int, features: FeatureMatrix, annotations: AnnotationIndex, k: int) -> float:
    """Median per-image score of a tag over its associated images."""
    tag_name = annotations.tags[tag]
    images = annotations.images_of(tag_name)
    if not images:
        raise ValueError(f"tag {tag_name!r} has no associated images")
    scores = [
        image_tag_score(tag, img, knn_images(features, img, k), annotations) for img in images
    ]
    return float(np.median(scores))


def compute_vcdl_report(
    features: FeatureMatrix, annotations: AnnotationIndex, k: int
) -> VcdlReport:
    """VCDL for every corpus tag, sharing one neighbour index pass."""
    nb = neighbor_index(features, k)
    incidence = annotations.incidence()
    weights = _rank_weights(k, nb.shape[1])
    per_tag = {}
    for j, tag in enumerate(annotations.tags):
        rows = np.array(annotations.images_of(tag), dtype=np.int64)
        scores = incidence[nb[rows], j].astype(np.float64) @ weights
        per_tag[tag] = float(np.median(scores))
    return VcdlReport(k, per_tag)


def filter_tags(report: VcdlReport, threshold: float) -> FilterResult:
    """Split tags into retained (VCDL >= threshold) and removed-with-score."""
    retained = tuple(sorted(t for t, v in report.per_tag.items() if v >= threshold))
    removed = {t: report.per_tag[t] for t in sorted(report.per_tag) if t not in set(retained)}
    return FilterResult(threshold, retained, removed)


def write_filter_result(result: FilterResult, path: str | Path) -> None:
    payload = {
        "threshold": result.threshold,
        "retained": list(result.retained),
        "removed": result.removed,
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_filter_result(path: str | Path) -> FilterResult:
    raw = json.loads(Path(path).read_text())
    return FilterResult(
        float(raw["threshold"]),
        tuple(raw["retained"]),
        {str(t): float(v) for t, v in raw["removed"].items()},
    )
