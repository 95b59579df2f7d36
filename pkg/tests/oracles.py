"""Independent brute-force oracles.

Each function is written directly from the quantity's definition, on
purpose not sharing code with the package kernels it checks: plain
loops, raw dict/tuple inputs, stdlib math where possible.
"""

from __future__ import annotations

import math
from collections import Counter

import numpy as np


def directed_modified_hausdorff_oracle(a: np.ndarray, b: np.ndarray) -> float:
    """Mean of nonzero nearest-point distances, double loop."""
    total = 0.0
    kept = 0
    for p in a:
        best = min(float(np.linalg.norm(p - q)) for q in b)
        if best != 0.0:
            total += best
            kept += 1
    return total / kept if kept else 0.0


def symmetric_hausdorff_oracle(a: np.ndarray, b: np.ndarray) -> float:
    return max(
        directed_modified_hausdorff_oracle(a, b),
        directed_modified_hausdorff_oracle(b, a),
    )


def classical_directed_oracle(a: np.ndarray, b: np.ndarray) -> float:
    return max(min(float(np.linalg.norm(p - q)) for q in b) for p in a)


def knn_oracle(data: np.ndarray, query: int, k: int) -> list[int]:
    """Exhaustive cosine-distance sort with (distance, index) ordering."""
    q = data[query]
    nq = math.sqrt(float(q @ q))
    scored = []
    for i, row in enumerate(data):
        if i == query:
            continue
        d = 1.0 - float(row @ q) / (math.sqrt(float(row @ row)) * nq)
        scored.append((d, i))
    scored.sort()
    return [i for _, i in scored[: min(k, len(data) - 1)]]


def knsm_oracle(
    query_tags: dict[str, list[str]],
    ranked_images: dict[str, list[int]],
    train_tags_by_image: dict[int, set[str]],
    k: int,
) -> int:
    """Triple loop over queries, their tags, and their top-k results."""
    total = 0
    for query in query_tags:
        for tag in query_tags[query]:
            for image in ranked_images[query][:k]:
                if tag in train_tags_by_image.get(image, set()):
                    total += 1
    return total


def entropy_oracle(theme_sets: list[set[int]]) -> float:
    """Base-2 entropy of the pooled theme histogram, stdlib math."""
    counts = Counter(theme for themes in theme_sets for theme in themes)
    total = sum(counts.values())
    if total == 0:
        return 0.0
    return -sum((c / total) * math.log2(c / total) for c in counts.values())


def split_gain_oracle(
    theme_sets: list[set[int]], go_left: list[bool]
) -> float:
    left = [s for s, flag in zip(theme_sets, go_left) if flag]
    right = [s for s, flag in zip(theme_sets, go_left) if not flag]
    if not left or not right:
        return float("-inf")
    n = len(theme_sets)
    return (
        entropy_oracle(theme_sets)
        - (len(left) / n) * entropy_oracle(left)
        - (len(right) / n) * entropy_oracle(right)
    )


def route_oracle(encoded_tree: list[dict], query: np.ndarray) -> list[int]:
    """Walk one serialized tree (raw node dicts) down to its leaf."""
    index = 0
    while True:
        node = encoded_tree[index]
        if "images" in node:
            return node["images"]
        index = node["left"] if query[node["dim"]] <= node["thr"] else node["right"]


def forest_votes_oracle(encoded_forest: dict, query: np.ndarray) -> dict[int, int]:
    votes: Counter[int] = Counter()
    for tree in encoded_forest["trees"]:
        votes.update(route_oracle(tree, query))
    return dict(votes)


def adjusted_rand_index(labels_a: list[int], labels_b: list[int]) -> float:
    """Standard pair-counting ARI from the contingency table."""
    assert len(labels_a) == len(labels_b)

    def comb2(x: int) -> float:
        return x * (x - 1) / 2.0

    joint = Counter(zip(labels_a, labels_b))
    sum_ij = sum(comb2(v) for v in joint.values())
    sum_a = sum(comb2(v) for v in Counter(labels_a).values())
    sum_b = sum(comb2(v) for v in Counter(labels_b).values())
    total = comb2(len(labels_a))
    expected = sum_a * sum_b / total
    max_index = (sum_a + sum_b) / 2.0
    if max_index == expected:
        return 1.0
    return (sum_ij - expected) / (max_index - expected)
