"""Randomized binary forest over visual features with theme-histogram splits.

Each tree splits on (feature dimension, threshold) candidates drawn at
random per node, keeping the candidate with the largest information gain
on the node's theme histogram (an image contributes one count per theme
it carries). Trees see the full training set (no bootstrap), so every
training image is reachable in every tree. A query routed through the
forest collects the training images of each reached leaf; an image's
vote count across trees measures its affinity to the query.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .corpus import FeatureMatrix
from .themecluster import ThemeCorpus

FOREST_FORMAT_VERSION = 1


@dataclass(frozen=True)
class TreeNode:
    """Internal split (left iff x[feature_dim] <= threshold) or leaf."""

    feature_dim: int = -1
    threshold: float = 0.0
    left: int = -1
    right: int = -1
    training_images: tuple[int, ...] = ()

    @property
    def is_leaf(self) -> bool:
        return self.left < 0

    def __post_init__(self) -> None:
        if self.is_leaf and not self.training_images:
            raise ValueError("leaf node must hold at least one training image")
        if not self.is_leaf and (self.feature_dim < 0 or self.right < 0):
            raise ValueError("internal node needs a feature dim and two children")


@dataclass(frozen=True)
class ForestParams:
    num_trees: int = 400
    max_depth: int = 20
    min_leaf: int = 5
    mtry: int | None = None  # defaults to ceil(sqrt(num_dims)) at build time
    thresholds_per_dim: int = 8
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_trees < 1:
            raise ValueError("num_trees must be >= 1")
        if self.max_depth < 1 or self.min_leaf < 1 or self.thresholds_per_dim < 1:
            raise ValueError("max_depth, min_leaf and thresholds_per_dim must be >= 1")
        if self.mtry is not None and self.mtry < 1:
            raise ValueError("mtry must be >= 1 when given")


@dataclass(frozen=True)
class ThemeForest:
    """An ensemble of trees; each tree is a flat node list rooted at 0."""

    trees: tuple[tuple[TreeNode, ...], ...]
    params: ForestParams
    num_dims: int

    @property
    def num_trees(self) -> int:
        return len(self.trees)


@dataclass(frozen=True)
class HybridNeighborSet:
    """Vote counts: how many trees co-locate each training image with the query."""

    votes: dict[int, int]

    def __post_init__(self) -> None:
        if not self.votes:
            raise ValueError("a query always reaches at least one nonempty leaf")


def shannon_entropy(counts: np.ndarray) -> float:
    """Base-2 entropy of a count histogram; empty histograms score 0."""
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def _theme_count_matrix(theme_corpus: ThemeCorpus, num_images: int) -> np.ndarray:
    theme_ids = sorted(theme_corpus.theme_frequencies)
    column = {t: j for j, t in enumerate(theme_ids)}
    out = np.zeros((num_images, len(theme_ids)), dtype=np.int64)
    for image, themes in theme_corpus.image_to_themes.items():
        for t in themes:
            out[image, column[t]] = 1
    return out


def split_gain(
    samples: "list[int] | np.ndarray",
    theme_corpus: ThemeCorpus,
    feature_dim: int,
    threshold: float,
    features: FeatureMatrix,
) -> float:
    """Information gain of one candidate split on the theme histogram.

    Gain = H(parent) - |L|/|S| * H(L) - |R|/|S| * H(R) with image-count
    weights; a split leaving either side empty scores -inf.
    """
    samples = np.asarray(samples, dtype=np.int64)
    if samples.size == 0:
        raise ValueError("cannot score a split over zero samples")
    counts = _theme_count_matrix(theme_corpus, features.num_images)
    x = features.data[samples, feature_dim]
    left = samples[x <= threshold]
    right = samples[x > threshold]
    if left.size == 0 or right.size == 0:
        return float("-inf")
    parent = counts[samples].sum(axis=0)
    h_parent = shannon_entropy(parent)
    h_left = shannon_entropy(counts[left].sum(axis=0))
    h_right = shannon_entropy(counts[right].sum(axis=0))
    n = samples.size
    return h_parent - (left.size / n) * h_left - (right.size / n) * h_right


def _grow_tree(
    data: np.ndarray,
    counts: np.ndarray,
    train: np.ndarray,
    params: ForestParams,
    mtry: int,
    rng: np.random.Generator,
) -> tuple[TreeNode, ...]:
    num_dims = data.shape[1]
    nodes: list[TreeNode | None] = []

    def grow(samples: np.ndarray, depth: int) -> int:
        index = len(nodes)
        nodes.append(None)
        best: tuple[int, float] | None = None
        if depth < params.max_depth and samples.size > params.min_leaf:
            parent_counts = counts[samples].sum(axis=0)
            h_parent = shannon_entropy(parent_counts)
            best_gain = 0.0
            n = samples.size
            for dim in rng.choice(num_dims, size=mtry, replace=False):
                x = data[samples, dim]
                lo, hi = x.min(), x.max()
                if lo == hi:
                    continue
                for thr in rng.uniform(lo, hi, size=params.thresholds_per_dim):
                    mask = x <= thr
                    n_left = int(mask.sum())
                    if n_left == 0 or n_left == n:
                        continue
                    left_counts = counts[samples[mask]].sum(axis=0)
                    gain = (
                        h_parent
                        - (n_left / n) * shannon_entropy(left_counts)
                        - ((n - n_left) / n) * shannon_entropy(parent_counts - left_counts)
                    )
                    if gain > best_gain:
                        best_gain = gain
                        best = (int(dim), float(thr))
        if best is None:
            nodes[index] = TreeNode(training_images=tuple(int(i) for i in samples))
            return index
        dim, thr = best
        mask = data[samples, dim] <= thr
        left_index = grow(samples[mask], depth + 1)
        right_index = grow(samples[~mask], depth + 1)
        nodes[index] = TreeNode(feature_dim=dim, threshold=thr, left=left_index, right=right_index)
        return index

    grow(train, 0)
    return tuple(node for node in nodes if node is not None)


def build_forest(
    features: FeatureMatrix, theme_corpus: ThemeCorpus, params: ForestParams
) -> ThemeForest:
    """Grow a deterministic forest over all training images that carry themes.

    Tree ``t`` draws from an independent child stream of the master seed,
    so forests are reproducible and trees are mutually independent.
    Images with no theme are excluded from training with a warning.
    """
    counts = _theme_count_matrix(theme_corpus, features.num_images)
    with_themes = counts.any(axis=1)
    train = np.flatnonzero(with_themes)
    excluded = features.num_images - train.size
    if excluded:
        warnings.warn(f"excluding {excluded} training image(s) without any theme")
    if train.size == 0:
        raise ValueError("no training image carries a theme")
    mtry = params.mtry if params.mtry is not None else math.ceil(math.sqrt(features.num_dims))
    mtry = min(mtry, features.num_dims)
    children = np.random.SeedSequence(params.seed).spawn(params.num_trees)
    trees = tuple(
        _grow_tree(features.data, counts, train, params, mtry, np.random.default_rng(children[t]))
        for t in range(params.num_trees)
    )
    return ThemeForest(trees, replace(params, mtry=mtry), features.num_dims)


def route_to_leaf(tree: tuple[TreeNode, ...], query: np.ndarray) -> TreeNode:
    """Follow one tree's splits down to the leaf containing the query."""
    node = tree[0]
    while not node.is_leaf:
        node = tree[node.left if query[node.feature_dim] <= node.threshold else node.right]
    return node


def query_forest(forest: ThemeForest, query_features: np.ndarray) -> HybridNeighborSet:
    """Collect per-image vote counts from every tree's reached leaf."""
    query = np.asarray(query_features, dtype=np.float64)
    if query.shape != (forest.num_dims,):
        raise ValueError(
            f"query has shape {query.shape}, forest expects ({forest.num_dims},)"
        )
    votes: dict[int, int] = {}
    for tree in forest.trees:
        for image in route_to_leaf(tree, query).training_images:
            votes[image] = votes.get(image, 0) + 1
    return HybridNeighborSet(votes)


def forest_to_dict(forest: ThemeForest) -> dict:
    trees = []
    for tree in forest.trees:
        encoded = []
        for node in tree:
            if node.is_leaf:
                encoded.append({"images": list(node.training_images)})
            else:
                encoded.append(
                    {
                        "dim": node.feature_dim,
                        "thr": node.threshold,
                        "left": node.left,
                        "right": node.right,
                    }
                )
        trees.append(encoded)
    p = forest.params
    return {
        "version": FOREST_FORMAT_VERSION,
        "num_dims": forest.num_dims,
        "params": {
            "num_trees": p.num_trees,
            "max_depth": p.max_depth,
            "min_leaf": p.min_leaf,
            "mtry": p.mtry,
            "thresholds_per_dim": p.thresholds_per_dim,
            "seed": p.seed,
        },
        "trees": trees,
    }


def forest_from_dict(raw: dict) -> ThemeForest:
    if raw.get("version") != FOREST_FORMAT_VERSION:
        raise ValueError(f"unsupported forest format version {raw.get('version')!r}")
    params = ForestParams(**raw["params"])
    trees = []
    for encoded in raw["trees"]:
        nodes = []
        for item in encoded:
            if "images" in item:
                nodes.append(TreeNode(training_images=tuple(item["images"])))
            else:
                nodes.append(
                    TreeNode(
                        feature_dim=item["dim"],
                        threshold=item["thr"],
                        left=item["left"],
                        right=item["right"],
                    )
                )
        trees.append(tuple(nodes))
    return ThemeForest(tuple(trees), params, int(raw["num_dims"]))


def save_forest(forest: ThemeForest, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(forest_to_dict(forest), sort_keys=True, separators=(",", ":")) + "\n"
    )


def load_forest(path: str | Path) -> ThemeForest:
    return forest_from_dict(json.loads(Path(path).read_text()))
