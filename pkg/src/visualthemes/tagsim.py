"""Tag-to-tag similarity matrices.

Visually, a tag is the point set of its associated images in feature
space. The distance between two tags is a symmetrised modified Hausdorff
distance: average each point's nearest-neighbour distance into the other
set, excluding coincident points so that co-annotated images do not drag
the average toward zero, then take the larger of the two directions.
Distances are min-max rescaled and inverted into a visual similarity
matrix. Semantic similarity is clamped word-vector cosine. A convex
combination of the two yields the joint matrix that drives clustering.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .corpus import AnnotationIndex, FeatureMatrix, WordVectorTable

KINDS = ("visual-distance", "visual", "semantic", "joint")


@dataclass(frozen=True)
class TagPointSet:
    """The feature rows of one tag's associated images."""

    tag: str
    points: np.ndarray

    def __post_init__(self) -> None:
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError(f"point set for {self.tag!r} must be a nonempty 2-D array")
        object.__setattr__(self, "points", pts)


@dataclass(frozen=True)
class SimilarityMatrix:
    """Symmetric tag-by-tag matrix; semantics depend on ``kind``.

    Similarity kinds hold values in [0, 1] with unit diagonal; the
    ``visual-distance`` kind holds nonnegative distances with zero
    diagonal.
    """

    tags: tuple[str, ...]
    values: np.ndarray
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown matrix kind {self.kind!r}")
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        n = len(self.tags)
        if vals.shape != (n, n):
            raise ValueError(f"matrix shape {vals.shape} does not match {n} tags")
        if not np.array_equal(vals, vals.T):
            raise ValueError("matrix is not exactly symmetric")
        diag = np.diagonal(vals)
        if self.kind == "visual-distance":
            if (vals < 0).any():
                raise ValueError("distances must be nonnegative")
            if (diag != 0.0).any():
                raise ValueError("distance diagonal must be zero")
        else:
            if (vals < 0).any() or (vals > 1).any():
                raise ValueError("similarities must lie in [0, 1]")
            if (diag != 1.0).any():
                raise ValueError("similarity diagonal must be one")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "tags", tuple(self.tags))


def point_set(tag: str, features: FeatureMatrix, annotations: AnnotationIndex) -> TagPointSet:
    return TagPointSet(tag, features.data[list(annotations.images_of(tag))])


def directed_modified_hausdorff(a: TagPointSet, b: TagPointSet) -> float:
    """Mean nearest-point distance from ``a`` into ``b``, zeros excluded.

    Points of ``a`` that coincide exactly with a point of ``b`` (shared
    images) are left out of the average; if every point coincides the
    distance is 0.
    """
    mins = cdist(a.points, b.points).min(axis=1)
    nonzero = mins[mins != 0.0]
    if nonzero.size == 0:
        return 0.0
    return float(nonzero.mean())


def classical_directed_hausdorff(a: TagPointSet, b: TagPointSet) -> float:
    """Max-of-minima directed Hausdorff distance (reference kernel)."""
    return float(cdist(a.points, b.points).min(axis=1).max())


def tag_visual_distance(a: TagPointSet, b: TagPointSet) -> float:
    """Symmetrised modified Hausdorff distance: max of both directions."""
    dmat = cdist(a.points, b.points)
    forward = dmat.min(axis=1)
    backward = dmat.min(axis=0)
    parts = []
    for mins in (forward, backward):
        nonzero = mins[mins != 0.0]
        parts.append(float(nonzero.mean()) if nonzero.size else 0.0)
    return max(parts)


def visual_distance_matrix(
    tags: tuple[str, ...] | list[str],
    features: FeatureMatrix,
    annotations: AnnotationIndex,
) -> SimilarityMatrix:
    """All-pairs tag visual distances over the given (retained) tags."""
    tags = tuple(tags)
    sets = [point_set(t, features, annotations) for t in tags]
    n = len(tags)
    values = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d = tag_visual_distance(sets[i], sets[j])
            values[i, j] = d
            values[j, i] = d
    return SimilarityMatrix(tags, values, "visual-distance")


def distance_to_similarity(dist: SimilarityMatrix) -> SimilarityMatrix:
    """Min-max rescale off-diagonal distances to [0, 1] and invert.

    The closest pair maps to similarity 1, the farthest to 0; the
    diagonal is pinned to 1. When every off-diagonal distance is equal
    the rescale is information-free and all similarities become 0.5.
    """
    if dist.kind != "visual-distance":
        raise ValueError(f"expected a visual-distance matrix, got {dist.kind!r}")
    n = len(dist.tags)
    if n < 2:
        raise ValueError("need at least two tags to rescale distances")
    off = ~np.eye(n, dtype=bool)
    lo, hi = dist.values[off].min(), dist.values[off].max()
    values = np.empty((n, n))
    if lo == hi:
        warnings.warn("all pairwise tag distances are equal; emitting flat 0.5 similarities")
        values.fill(0.5)
    else:
        values[:] = 1.0 - (dist.values - lo) / (hi - lo)
        values = np.clip(values, 0.0, 1.0)
    np.fill_diagonal(values, 1.0)
    return SimilarityMatrix(dist.tags, values, "visual")


def visual_similarity_matrix(
    tags: tuple[str, ...] | list[str],
    features: FeatureMatrix,
    annotations: AnnotationIndex,
) -> SimilarityMatrix:
    return distance_to_similarity(visual_distance_matrix(tags, features, annotations))


def semantic_similarity_matrix(
    tags: tuple[str, ...] | list[str], vectors: WordVectorTable
) -> SimilarityMatrix:
    """Clamped cosine similarity between the tags' word vectors.

    Negative cosines clamp to 0 so the matrix stays a valid affinity.
    Tags without a vector get similarity 0 to every other tag (1 to
    self) and are reported with a warning.
    """
    tags = tuple(tags)
    n = len(tags)
    unit = np.zeros((n, vectors.dim))
    missing = []
    for i, tag in enumerate(tags):
        if tag in vectors:
            v = vectors.vector(tag)
            norm = np.linalg.norm(v)
            if norm == 0.0:
                raise ValueError(f"zero-norm word vector for {tag!r}")
            unit[i] = v / norm
        else:
            missing.append(tag)
    if missing:
        warnings.warn(
            f"{len(missing)} tag(s) lack word vectors and get zero semantic "
            f"similarity: {', '.join(missing[:5])}"
        )
    gram = unit @ unit.T
    upper = np.triu(gram, 1)
    values = np.clip(upper + upper.T, 0.0, 1.0)
    np.fill_diagonal(values, 1.0)
    return SimilarityMatrix(tags, values, "semantic")


def merge_similarity(
    visual: SimilarityMatrix, semantic: SimilarityMatrix, alpha: float
) -> SimilarityMatrix:
    """Convex combination ``alpha * visual + (1 - alpha) * semantic``."""
    if visual.kind != "visual" or semantic.kind != "semantic":
        raise ValueError(f"cannot merge kinds {visual.kind!r} and {semantic.kind!r}")
    if visual.tags != semantic.tags:
        raise ValueError("matrices are over different tag orderings")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    values = np.clip(alpha * visual.values + (1.0 - alpha) * semantic.values, 0.0, 1.0)
    np.fill_diagonal(values, 1.0)
    return SimilarityMatrix(visual.tags, values, "joint")


def save_similarity_matrix(matrix: SimilarityMatrix, path: str | Path) -> None:
    """Write a matrix in the feature-file format plus tag order and kind."""
    path = Path(path)
    bin_name = path.stem + ".bin"
    n = len(matrix.tags)
    manifest = {
        "num_images": n,
        "num_dims": n,
        "dtype": "f32le",
        "order": "row-major",
        "data": bin_name,
        "image_ids": list(matrix.tags),
        "tags": list(matrix.tags),
        "kind": matrix.kind,
    }
    (path.parent / bin_name).write_bytes(matrix.values.astype("<f4").tobytes())
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_similarity_matrix(path: str | Path) -> SimilarityMatrix:
    path = Path(path)
    manifest = json.loads(path.read_text())
    for key in ("tags", "kind", "data", "num_images", "num_dims"):
        if key not in manifest:
            raise ValueError(f"similarity manifest missing key {key!r}")
    tags = tuple(str(t) for t in manifest["tags"])
    n = len(tags)
    if manifest["num_images"] != n or manifest["num_dims"] != n:
        raise ValueError("similarity manifest shape does not match tag count")
    payload = (path.parent / manifest["data"]).read_bytes()
    if len(payload) != n * n * 4:
        raise ValueError("similarity payload size mismatch")
    values = np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(n, n)
    return SimilarityMatrix(tags, values, str(manifest["kind"]))
