"""Retrieval and labelling tasks over a theme forest, with their metrics.

Three applications share the forest's vote counts: example-based search
ranks training images by votes; keyword search resolves a tag to its
theme and ranks test images by vote-weighted theme proximity; labelling
pools the tags of the top voted neighbours and keeps those with the
highest VCDL. Metrics: a cumulative tag-agreement count over the top K
results (KNSM), mean average precision for keyword rankings, and per-tag
macro precision/recall for labelling.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .corpus import AnnotationIndex, FeatureMatrix
from .themecluster import ThemeAssignment, ThemeCorpus
from .themeforest import HybridNeighborSet, ThemeForest, query_forest
from .wknm import VcdlReport


@dataclass(frozen=True)
class RankedResult:
    """Images ranked by descending score; ties broken by ascending index."""

    query_id: str
    ranked: tuple[tuple[int, float], ...]

    def __post_init__(self) -> None:
        scores = [s for _, s in self.ranked]
        if any(b > a for a, b in zip(scores, scores[1:])):
            raise ValueError("scores must be nonincreasing")
        images = [i for i, _ in self.ranked]
        if len(set(images)) != len(images):
            raise ValueError("duplicate images in ranking")

    def images(self) -> tuple[int, ...]:
        return tuple(i for i, _ in self.ranked)


@dataclass(frozen=True)
class LabelResult:
    """Predicted tags for one image, strongest VCDL first."""

    image: str
    predicted: tuple[tuple[str, float], ...]

    def __post_init__(self) -> None:
        scores = [s for _, s in self.predicted]
        if any(b > a for a, b in zip(scores, scores[1:])):
            raise ValueError("predicted VCDLs must be nonincreasing")
        tags = [t for t, _ in self.predicted]
        if len(set(tags)) != len(tags):
            raise ValueError("duplicate predicted tags")

    def tags(self) -> tuple[str, ...]:
        return tuple(t for t, _ in self.predicted)


@dataclass(frozen=True)
class MetricsReport:
    """Per-query metric values plus an aggregate recomputable from them."""

    task: str
    per_query: dict
    aggregate: dict
    parameters: dict

    def to_json(self) -> str:
        return json.dumps(
            {
                "task": self.task,
                "parameters": self.parameters,
                "aggregate": self.aggregate,
                "per_query": self.per_query,
            },
            indent=2,
            sort_keys=True,
        ) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        values = list(self.per_query.values())
        if values and isinstance(values[0], dict):
            fields = sorted(values[0])
            writer = csv.writer(buf, lineterminator="\n")
            writer.writerow(["query", *fields])
            for key in sorted(self.per_query):
                writer.writerow([key, *(self.per_query[key][f] for f in fields)])
        else:
            writer = csv.writer(buf, lineterminator="\n")
            writer.writerow(["query", "value"])
            for key in sorted(self.per_query):
                writer.writerow([key, self.per_query[key]])
        return buf.getvalue()


def rank_hybrid_neighbors(hns: HybridNeighborSet, top_k: int | None = None) -> tuple[tuple[int, float], ...]:
    """Order vote counts descending, ascending image index on ties."""
    ordered = sorted(hns.votes.items(), key=lambda kv: (-kv[1], kv[0]))
    if top_k is not None:
        ordered = ordered[:top_k]
    return tuple((img, float(v)) for img, v in ordered)


def example_search(
    forest: ThemeForest, query_features: np.ndarray, top_k: int, query_id: str = "query"
) -> RankedResult:
    """Rank training images by their vote counts for this query."""
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    return RankedResult(query_id, rank_hybrid_neighbors(query_forest(forest, query_features), top_k))


def knsm(
    query_tags: Mapping[str, Iterable[str]],
    results: Mapping[str, RankedResult],
    train_annotations: AnnotationIndex,
    k_max: int,
) -> MetricsReport:
    """Cumulative count of query-tag hits among each query's top K results.

    A hit is one (query tag, returned image) pair where the returned
    training image's annotation contains the tag. The aggregate carries
    the cumulative curve for K = 1..k_max; rankings shorter than K
    contribute only their length.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    curve = np.zeros(k_max, dtype=np.int64)
    per_query = {}
    for query_id in sorted(query_tags):
        tag_indices = [
            train_annotations.tag_position(t)
            for t in query_tags[query_id]
            if train_annotations.has_tag(t)
        ]
        hits = np.zeros(k_max, dtype=np.int64)
        for rank, (image, _) in enumerate(results[query_id].ranked[:k_max]):
            hits[rank] = sum(
                train_annotations.image_has_tag(image, t) for t in tag_indices
            )
        curve += hits
        per_query[query_id] = int(hits.sum())
    cumulative = np.cumsum(curve)
    return MetricsReport(
        task="knsm",
        per_query=per_query,
        aggregate={
            "knsm": int(cumulative[-1]),
            "curve": {str(k + 1): int(cumulative[k]) for k in range(k_max)},
        },
        parameters={"k_max": k_max},
    )


def theme_proximity(hns: HybridNeighborSet, theme: int, theme_corpus: ThemeCorpus) -> float:
    """Vote-weighted fraction of the query's neighbours carrying a theme."""
    total = sum(hns.votes.values())
    carrying = sum(v for img, v in hns.votes.items() if theme in theme_corpus.themes_of(img))
    return carrying / total


def resolve_keyword(keyword: str | int, themes: ThemeAssignment) -> int:
    """Map a member tag (or an explicit theme id) to its theme."""
    if isinstance(keyword, int):
        if keyword not in themes.theme_to_tags:
            raise ValueError(f"unknown theme id {keyword}")
        return keyword
    tag = keyword.strip().lower()
    if tag not in themes.tag_to_theme:
        raise ValueError(f"keyword {keyword!r} does not belong to any theme")
    return themes.tag_to_theme[tag]


def keyword_search(
    forest: ThemeForest,
    keyword: str | int,
    test_features: FeatureMatrix,
    themes: ThemeAssignment,
    theme_corpus: ThemeCorpus,
) -> RankedResult:
    """Rank every test image by its proximity to the keyword's theme.

    All member tags of one theme resolve to the same theme, so they yield
    identical rankings by construction.
    """
    theme = resolve_keyword(keyword, themes)
    scores = np.array(
        [
            theme_proximity(query_forest(forest, test_features.data[i]), theme, theme_corpus)
            for i in range(test_features.num_images)
        ]
    )
    order = np.lexsort((np.arange(scores.size), -scores))
    return RankedResult(
        f"theme:{theme}", tuple((int(i), float(scores[i])) for i in order)
    )


def mean_average_precision(
    rankings: Mapping[str, RankedResult], relevance: Mapping[str, set[int]]
) -> MetricsReport:
    """Mean over keywords of the average precision at each relevant hit.

    Keywords with no relevant image at all are excluded from the mean and
    listed in the aggregate.
    """
    per_query = {}
    excluded = []
    for keyword in sorted(rankings):
        relevant = relevance[keyword]
        if not relevant:
            excluded.append(keyword)
            continue
        hits = 0
        precision_sum = 0.0
        for position, image in enumerate(rankings[keyword].images(), start=1):
            if image in relevant:
                hits += 1
                precision_sum += hits / position
        per_query[keyword] = precision_sum / hits if hits else 0.0
    mean = float(np.mean(list(per_query.values()))) if per_query else 0.0
    return MetricsReport(
        task="map",
        per_query=per_query,
        aggregate={"map": mean, "keywords_without_relevant": excluded},
        parameters={},
    )


def label_image(
    forest: ThemeForest,
    query_features: np.ndarray,
    vcdl_report: VcdlReport,
    m: int,
    n: int,
    train_annotations: AnnotationIndex,
    query_id: str = "query",
) -> LabelResult:
    """Predict up to ``n`` tags from the ``m`` top voted neighbours.

    The pooled tags of the top voted training images are deduplicated and
    ranked by VCDL (ties alphabetically); no tag filtering is applied.
    """
    if m < 1 or n < 1:
        raise ValueError("m and n must be >= 1")
    top = rank_hybrid_neighbors(query_forest(forest, query_features), m)
    pooled: set[str] = set()
    for image, _ in top:
        pooled.update(train_annotations.tags[t] for t in train_annotations.tags_of(image))
    try:
        scored = sorted(pooled, key=lambda t: (-vcdl_report.per_tag[t], t))
    except KeyError as exc:
        raise ValueError(f"no VCDL available for pooled tag {exc.args[0]!r}") from exc
    return LabelResult(
        query_id, tuple((t, vcdl_report.per_tag[t]) for t in scored[:n])
    )


def precision_recall(
    predictions: Mapping[int, LabelResult], ground_truth: AnnotationIndex
) -> MetricsReport:
    """Per-tag macro precision and recall of predicted labels.

    For each ground-truth tag: precision is the fraction of its
    predictions that were correct (0 when never predicted) and recall the
    fraction of its occurrences that were recovered. The aggregate is the
    unweighted mean over all ground-truth tags.
    """
    predicted_by_tag: dict[str, set[int]] = {}
    for image, result in predictions.items():
        for tag in result.tags():
            predicted_by_tag.setdefault(tag, set()).add(image)
    per_tag = {}
    for tag in ground_truth.tags:
        truth = set(ground_truth.images_of(tag))
        predicted = predicted_by_tag.get(tag, set())
        correct = len(predicted & truth)
        per_tag[tag] = {
            "precision": correct / len(predicted) if predicted else 0.0,
            "recall": correct / len(truth),
            "predicted": len(predicted),
            "correct": correct,
            "ground_truth": len(truth),
        }
    num_tags = len(ground_truth.tags)
    return MetricsReport(
        task="precision_recall",
        per_query=per_tag,
        aggregate={
            "precision": sum(v["precision"] for v in per_tag.values()) / num_tags,
            "recall": sum(v["recall"] for v in per_tag.values()) / num_tags,
        },
        parameters={},
    )


def write_report(report: MetricsReport, json_path: str | Path, csv_path: str | Path | None = None) -> None:
    Path(json_path).write_text(report.to_json())
    if csv_path is not None:
        Path(csv_path).write_text(report.to_csv())


def load_report(path: str | Path) -> MetricsReport:
    raw = json.loads(Path(path).read_text())
    return MetricsReport(raw["task"], raw["per_query"], raw["aggregate"], raw["parameters"])
