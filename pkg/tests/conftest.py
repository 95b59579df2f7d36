"""Shared fixtures: seeded synthetic corpora and on-disk corpus files."""

import pytest

from visualthemes.corpus import (
    SyntheticSpec,
    generate_synthetic_corpus,
    write_annotations,
    write_feature_matrix,
    write_word_vectors,
)


@pytest.fixture(scope="session")
def two_cluster():
    """2 well-separated clusters, 20 images and 3 tags each, 4 dims."""
    return generate_synthetic_corpus(SyntheticSpec(2, 20, 4, 3, 0.05, seed=11))


@pytest.fixture(scope="session")
def four_cluster():
    """4 clusters, 50 images and 5 tags each, 8 dims."""
    return generate_synthetic_corpus(SyntheticSpec(4, 50, 8, 5, 0.05, seed=23))


@pytest.fixture
def write_corpus(tmp_path):
    """Write a generated corpus into tmp_path; returns the three paths."""

    def _write(spec: SyntheticSpec, subdir: str = "corpus"):
        base = tmp_path / subdir
        base.mkdir(parents=True, exist_ok=True)
        features, annotations, vectors = generate_synthetic_corpus(spec)
        write_feature_matrix(features, base / "features.json")
        write_annotations(annotations, features.image_ids, base / "annotations.jsonl")
        write_word_vectors(vectors, base / "vectors.txt")
        return base / "features.json", base / "annotations.jsonl", base / "vectors.txt"

    return _write
