"""Forest growth, information-gain splits, routing and vote counting."""

import numpy as np
import pytest

from visualthemes.corpus import FeatureMatrix
from visualthemes.themecluster import ThemeCorpus
from visualthemes.themeforest import (
    ForestParams,
    HybridNeighborSet,
    ThemeForest,
    TreeNode,
    build_forest,
    forest_to_dict,
    load_forest,
    query_forest,
    route_to_leaf,
    save_forest,
    shannon_entropy,
    split_gain,
)

from oracles import forest_votes_oracle, split_gain_oracle


def _matrix(rows):
    return FeatureMatrix(np.asarray(rows, dtype=float), tuple(f"i{k}" for k in range(len(rows))))


def _theme_corpus(theme_by_image):
    frequencies = {}
    for themes in theme_by_image.values():
        for t in themes:
            frequencies[t] = frequencies.get(t, 0) + 1
    return ThemeCorpus({i: frozenset(ts) for i, ts in theme_by_image.items()}, frequencies)


@pytest.fixture(scope="module")
def cluster_forest(four_cluster):
    """50-tree forest over the 4-cluster corpus with per-cluster themes."""
    features, _, _ = four_cluster
    per = features.num_images // 4
    theme_corpus = _theme_corpus({i: {i // per} for i in range(features.num_images)})
    params = ForestParams(num_trees=50, max_depth=12, min_leaf=4, seed=99)
    return build_forest(features, theme_corpus, params), features, theme_corpus


class TestSplitGain:
    def test_perfect_separation_gains_one_bit(self):
        features = _matrix([[0.0], [1.0], [10.0], [11.0]])
        corpus = _theme_corpus({0: {0}, 1: {0}, 2: {1}, 3: {1}})
        gain = split_gain([0, 1, 2, 3], corpus, 0, 5.0, features)
        assert gain == pytest.approx(1.0, abs=1e-12)

    def test_empty_side_rejected_with_sentinel(self):
        features = _matrix([[0.0], [1.0]])
        corpus = _theme_corpus({0: {0}, 1: {1}})
        assert split_gain([0, 1], corpus, 0, 5.0, features) == float("-inf")

    def test_matches_independent_entropy_oracle(self):
        rng = np.random.default_rng(44)
        features = _matrix(rng.standard_normal((30, 3)))
        theme_by_image = {
            i: set(rng.choice(5, size=rng.integers(1, 4), replace=False).tolist())
            for i in range(30)
        }
        corpus = _theme_corpus(theme_by_image)
        samples = list(range(30))
        for _ in range(25):
            dim = int(rng.integers(3))
            thr = float(rng.uniform(-1, 1))
            expected = split_gain_oracle(
                [theme_by_image[i] for i in samples],
                [features.data[i, dim] <= thr for i in samples],
            )
            got = split_gain(samples, corpus, dim, thr, features)
            if expected == float("-inf"):
                assert got == float("-inf")
            else:
                assert got == pytest.approx(expected, abs=1e-12)

    def test_gain_bounded_by_parent_entropy(self):
        rng = np.random.default_rng(15)
        features = _matrix(rng.standard_normal((40, 2)))
        theme_by_image = {i: {int(rng.integers(3))} for i in range(40)}
        corpus = _theme_corpus(theme_by_image)
        parent = shannon_entropy(
            np.bincount([next(iter(theme_by_image[i])) for i in range(40)])
        )
        for _ in range(20):
            gain = split_gain(
                list(range(40)), corpus, int(rng.integers(2)), float(rng.uniform(-1, 1)), features
            )
            if gain != float("-inf"):
                assert gain <= parent + 1e-12


class TestBuildForest:
    def test_separable_themes_yield_pure_leaves(self):
        features = _matrix([[0.0], [0.5], [1.0], [9.0], [9.5], [10.0]])
        corpus = _theme_corpus({i: {0 if i < 3 else 1} for i in range(6)})
        forest = build_forest(
            features, corpus, ForestParams(num_trees=1, max_depth=5, min_leaf=1, seed=3)
        )
        tree = forest.trees[0]
        root = tree[0]
        assert not root.is_leaf
        for leaf_index in (root.left, root.right):
            node = tree[leaf_index]
            assert node.is_leaf
            themes = {next(iter(corpus.themes_of(i))) for i in node.training_images}
            assert len(themes) == 1

    def test_leaves_partition_training_set(self, cluster_forest):
        forest, features, _ = cluster_forest
        for tree in forest.trees:
            seen = []
            for node in tree:
                if node.is_leaf:
                    seen.extend(node.training_images)
            assert sorted(seen) == list(range(features.num_images))

    def test_leaf_majority_purity_on_planted_clusters(self, cluster_forest):
        forest, features, corpus = cluster_forest
        per = features.num_images // 4
        pure = 0
        total = 0
        for tree in forest.trees:
            for node in tree:
                if not node.is_leaf:
                    continue
                total += 1
                clusters = [i // per for i in node.training_images]
                top = max(np.bincount(clusters))
                if top / len(clusters) >= 0.9:
                    pure += 1
        assert pure / total >= 0.95

    def test_images_without_themes_excluded_with_warning(self):
        features = _matrix([[0.0], [1.0], [2.0], [3.0]])
        corpus = _theme_corpus({0: {0}, 1: {0}, 3: {1}})
        with pytest.warns(UserWarning, match="excluding 1"):
            forest = build_forest(
                features, corpus, ForestParams(num_trees=2, min_leaf=1, seed=0)
            )
        routed = set()
        for tree in forest.trees:
            for node in tree:
                if node.is_leaf:
                    routed.update(node.training_images)
        assert 2 not in routed

    def test_empty_training_set_rejected(self):
        features = _matrix([[0.0]])
        with pytest.warns(UserWarning, match="excluding"):
            with pytest.raises(ValueError, match="no training image"):
                build_forest(features, ThemeCorpus({}, {}), ForestParams(num_trees=1))

    def test_deterministic_serialization(self, four_cluster, tmp_path):
        features, _, _ = four_cluster
        per = features.num_images // 4
        corpus = _theme_corpus({i: {i // per} for i in range(features.num_images)})
        params = ForestParams(num_trees=5, seed=7)
        for name in ("a", "b"):
            save_forest(build_forest(features, corpus, params), tmp_path / f"{name}.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_round_trip_preserves_routing(self, cluster_forest, tmp_path):
        forest, features, _ = cluster_forest
        save_forest(forest, tmp_path / "f.json")
        loaded = load_forest(tmp_path / "f.json")
        for i in (0, 57, 133):
            assert query_forest(loaded, features.data[i]).votes == query_forest(
                forest, features.data[i]
            ).votes


class TestQueryForest:
    def _hand_forest(self):
        # single tree: split at x <= 1.5, leaves {0, 1} and {3, 7}
        tree = (
            TreeNode(feature_dim=0, threshold=1.5, left=1, right=2),
            TreeNode(training_images=(0, 1)),
            TreeNode(training_images=(3, 7)),
        )
        return ThemeForest((tree,), ForestParams(num_trees=1), num_dims=1)

    def test_single_tree_counts(self):
        forest = self._hand_forest()
        votes = query_forest(forest, np.array([2.0])).votes
        assert votes == {3: 1, 7: 1}

    def test_training_image_reaches_its_own_leaf_everywhere(self, cluster_forest):
        forest, features, _ = cluster_forest
        for image in (3, 77, 190):
            votes = query_forest(forest, features.data[image]).votes
            assert votes[image] == forest.num_trees

    def test_votes_match_per_tree_routing_oracle(self, cluster_forest):
        forest, features, _ = cluster_forest
        encoded = forest_to_dict(forest)
        rng = np.random.default_rng(12)
        for _ in range(10):
            query = rng.standard_normal(features.num_dims) * 5
            assert query_forest(forest, query).votes == forest_votes_oracle(encoded, query)

    def test_monotone_voting_under_more_trees(self, cluster_forest):
        forest, features, _ = cluster_forest
        half = ThemeForest(forest.trees[:25], forest.params, forest.num_dims)
        for image in (10, 120):
            full_votes = query_forest(forest, features.data[image]).votes
            half_votes = query_forest(half, features.data[image]).votes
            for img, v in half_votes.items():
                assert full_votes[img] >= v

    def test_dimension_mismatch_rejected(self, cluster_forest):
        forest, _, _ = cluster_forest
        with pytest.raises(ValueError, match="shape"):
            query_forest(forest, np.zeros(forest.num_dims + 1))

    def test_routing_total_and_deterministic(self, cluster_forest):
        forest, features, _ = cluster_forest
        query = features.data[5]
        leaves = [route_to_leaf(tree, query) for tree in forest.trees]
        again = [route_to_leaf(tree, query) for tree in forest.trees]
        assert all(a is b for a, b in zip(leaves, again))
        assert all(leaf.is_leaf for leaf in leaves)


class TestNodeInvariants:
    def test_leaf_requires_images(self):
        with pytest.raises(ValueError, match="leaf"):
            TreeNode()

    def test_internal_requires_children(self):
        with pytest.raises(ValueError, match="internal"):
            TreeNode(feature_dim=0, threshold=1.0, left=1, right=-1)

    def test_empty_votes_rejected(self):
        with pytest.raises(ValueError, match="leaf"):
            HybridNeighborSet({})
