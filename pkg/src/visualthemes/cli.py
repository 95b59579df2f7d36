"""Command-line interface and pipeline orchestration.

The pipeline runs filter -> similarity -> cluster -> forest -> tasks from
one JSON config, persisting every stage artifact under the output
directory and recording parameter values plus content hashes in a
manifest. A stage whose parameters and input hashes match the previous
manifest (and whose outputs still verify) is skipped. Stages exchange
data exclusively through their files, so cached and freshly computed
stages feed identical bytes downstream.

Exit codes: 0 success, 2 configuration or input error, 3-7 failure in
filter, similarity, cluster, forest, or tasks respectively.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from . import __version__, corpus, tagsim, tasks, themecluster, themeforest, wknm

STAGE_ORDER = ("filter", "similarity", "cluster", "forest", "tasks")
STAGE_EXIT_CODES = {name: 3 + i for i, name in enumerate(STAGE_ORDER)}


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineConfig:
    features: Path
    annotations: Path
    word_vectors: Path
    output_dir: Path
    test_features: Path | None = None
    test_annotations: Path | None = None
    k: int = 10
    vcdl_threshold: float = 1.5
    alpha: float = 0.15
    num_themes: int = 100
    min_frequency: int = 0
    cluster_seed: int = 0
    num_trees: int = 400
    max_depth: int = 20
    min_leaf: int = 5
    forest_seed: int = 0
    top_k: int = 10
    k_max: int = 10
    top_m: int = 3
    max_tags: int = 5

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        paths = raw.get("paths", {})
        for key in ("features", "annotations", "word_vectors", "output_dir"):
            if key not in paths:
                raise ValueError(f"config paths section missing {key!r}")
        wk = raw.get("wknm", {})
        sim = raw.get("similarity", {})
        clus = raw.get("cluster", {})
        forest = raw.get("forest", {})
        task = raw.get("tasks", {})
        cfg = cls(
            features=Path(paths["features"]),
            annotations=Path(paths["annotations"]),
            word_vectors=Path(paths["word_vectors"]),
            output_dir=Path(paths["output_dir"]),
            test_features=Path(paths["test_features"]) if "test_features" in paths else None,
            test_annotations=(
                Path(paths["test_annotations"]) if "test_annotations" in paths else None
            ),
            k=int(wk.get("k", 10)),
            vcdl_threshold=float(wk.get("vcdl_threshold", 1.5)),
            alpha=float(sim.get("alpha", 0.15)),
            num_themes=int(clus.get("num_themes", 100)),
            min_frequency=int(clus.get("min_frequency", 0)),
            cluster_seed=int(clus.get("seed", 0)),
            num_trees=int(forest.get("num_trees", 400)),
            max_depth=int(forest.get("max_depth", 20)),
            min_leaf=int(forest.get("min_leaf", 5)),
            forest_seed=int(forest.get("seed", 0)),
            top_k=int(task.get("top_k", 10)),
            k_max=int(task.get("k_max", 10)),
            top_m=int(task.get("top_m", 3)),
            max_tags=int(task.get("max_tags", 5)),
        )
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.k < 1:
            raise ValueError("wknm.k must be >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("similarity.alpha must lie in [0, 1]")
        if self.num_themes < 2:
            raise ValueError("cluster.num_themes must be >= 2")
        if self.min_frequency < 0:
            raise ValueError("cluster.min_frequency must be >= 0")
        if self.num_trees < 1 or self.max_depth < 1 or self.min_leaf < 1:
            raise ValueError("forest.num_trees/max_depth/min_leaf must be >= 1")
        if min(self.top_k, self.k_max, self.top_m, self.max_tags) < 1:
            raise ValueError("tasks parameters must be >= 1")
        paths = [self.features, self.annotations, self.word_vectors]
        paths += [p for p in (self.test_features, self.test_annotations) if p is not None]
        for path in paths:
            if not Path(path).exists():
                raise FileNotFoundError(f"input file not found: {path}")

    def stage_params(self, stage: str) -> dict:
        return {
            "filter": {"k": self.k, "vcdl_threshold": self.vcdl_threshold},
            "similarity": {"alpha": self.alpha},
            "cluster": {
                "num_themes": self.num_themes,
                "min_frequency": self.min_frequency,
                "seed": self.cluster_seed,
            },
            "forest": {
                "num_trees": self.num_trees,
                "max_depth": self.max_depth,
                "min_leaf": self.min_leaf,
                "seed": self.forest_seed,
            },
            "tasks": {
                "top_k": self.top_k,
                "k_max": self.k_max,
                "top_m": self.top_m,
                "max_tags": self.max_tags,
            },
        }[stage]


@dataclass
class RunResult:
    manifest_path: Path
    manifest: dict
    stage_status: dict[str, str] = field(default_factory=dict)

    @property
    def cache_hits(self) -> list[str]:
        return [s for s, status in self.stage_status.items() if status == "cached"]


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _feature_inputs(label: str, manifest_path: Path) -> dict[str, Path]:
    manifest = json.loads(manifest_path.read_text())
    return {label: manifest_path, f"{label}_data": manifest_path.parent / manifest["data"]}


def _load_features_and_annotations(
    features_path: Path, annotations_path: Path
) -> tuple[corpus.FeatureMatrix, corpus.AnnotationIndex]:
    features = corpus.load_feature_matrix(features_path)
    annotations = corpus.load_annotations(annotations_path, features.image_ids)
    return features, annotations


def _stage_filter(config: PipelineConfig, out: Path) -> None:
    features, annotations = _load_features_and_annotations(config.features, config.annotations)
    report = wknm.compute_vcdl_report(features, annotations, config.k)
    (out / "vcdl.json").write_text(report.to_json())
    wknm.write_filter_result(
        wknm.filter_tags(report, config.vcdl_threshold), out / "retained.json"
    )


def _stage_similarity(config: PipelineConfig, out: Path) -> None:
    features, annotations = _load_features_and_annotations(config.features, config.annotations)
    retained = wknm.load_filter_result(out / "retained.json").retained
    if len(retained) < 2:
        raise ValueError(f"only {len(retained)} tag(s) retained; need at least 2")
    vectors, _missing = corpus.load_word_vectors(config.word_vectors, retained)
    vdist = tagsim.visual_distance_matrix(retained, features, annotations)
    vsim = tagsim.distance_to_similarity(vdist)
    ssim = tagsim.semantic_similarity_matrix(retained, vectors)
    joint = tagsim.merge_similarity(vsim, ssim, config.alpha)
    for name, matrix in (("vdist", vdist), ("vsim", vsim), ("ssim", ssim), ("joint", joint)):
        tagsim.save_similarity_matrix(matrix, out / f"sim_{name}.json")


def _stage_cluster(config: PipelineConfig, out: Path) -> None:
    joint = tagsim.load_similarity_matrix(out / "sim_joint.json")
    themes = themecluster.spectral_cluster(joint, config.num_themes, config.cluster_seed)
    themecluster.save_theme_assignment(themes, out / "themes.json")
    features, annotations = _load_features_and_annotations(config.features, config.annotations)
    del features
    theme_corpus = themecluster.relabel_corpus(annotations, themes, config.min_frequency)
    themecluster.save_theme_corpus(theme_corpus, out / "theme_corpus.json")


def _stage_forest(config: PipelineConfig, out: Path) -> None:
    features = corpus.load_feature_matrix(config.features)
    theme_corpus = themecluster.load_theme_corpus(out / "theme_corpus.json")
    params = themeforest.ForestParams(
        num_trees=config.num_trees,
        max_depth=config.max_depth,
        min_leaf=config.min_leaf,
        seed=config.forest_seed,
    )
    themeforest.save_forest(
        themeforest.build_forest(features, theme_corpus, params), out / "forest.json"
    )


def _stage_tasks(config: PipelineConfig, out: Path) -> None:
    forest = themeforest.load_forest(out / "forest.json")
    vcdl_report = wknm.VcdlReport.from_json((out / "vcdl.json").read_text())
    themes = themecluster.load_theme_assignment(out / "themes.json")
    theme_corpus = themecluster.load_theme_corpus(out / "theme_corpus.json")
    _train_features, train_annotations = _load_features_and_annotations(
        config.features, config.annotations
    )
    test_features, test_annotations = _load_features_and_annotations(
        config.test_features or config.features,
        config.test_annotations or config.annotations,
    )
    reports = out / "reports"
    reports.mkdir(exist_ok=True)

    query_tags = {}
    results = {}
    for i in range(test_features.num_images):
        query_id = test_features.image_ids[i]
        query_tags[query_id] = [test_annotations.tags[t] for t in test_annotations.tags_of(i)]
        results[query_id] = tasks.example_search(
            forest, test_features.data[i], max(config.top_k, config.k_max), query_id
        )
    knsm_report = tasks.knsm(query_tags, results, train_annotations, config.k_max)
    tasks.write_report(knsm_report, reports / "knsm.json", reports / "knsm.csv")

    rankings = {}
    relevance = {}
    for theme_id in sorted(theme_corpus.theme_frequencies):
        member_tags = themes.theme_to_tags[theme_id]
        rankings[str(theme_id)] = tasks.keyword_search(
            forest, theme_id, test_features, themes, theme_corpus
        )
        relevance[str(theme_id)] = {
            i
            for i in range(test_features.num_images)
            if any(
                test_annotations.has_tag(t)
                and test_annotations.image_has_tag(i, test_annotations.tag_position(t))
                for t in member_tags
            )
        }
    map_report = tasks.mean_average_precision(rankings, relevance)
    tasks.write_report(map_report, reports / "map.json", reports / "map.csv")

    predictions = {
        i: tasks.label_image(
            forest,
            test_features.data[i],
            vcdl_report,
            config.top_m,
            config.max_tags,
            train_annotations,
            query_id=test_features.image_ids[i],
        )
        for i in range(test_features.num_images)
    }
    pr_report = tasks.precision_recall(predictions, test_annotations)
    tasks.write_report(pr_report, reports / "labelling.json", reports / "labelling.csv")


def _stage_spec(config: PipelineConfig, out: Path) -> dict[str, tuple[dict[str, Path], list[str], Callable]]:
    train_inputs = _feature_inputs("features", config.features)
    test_features = config.test_features or config.features
    test_annotations = config.test_annotations or config.annotations
    return {
        "filter": (
            {**train_inputs, "annotations": config.annotations},
            ["vcdl.json", "retained.json"],
            _stage_filter,
        ),
        "similarity": (
            {
                **train_inputs,
                "annotations": config.annotations,
                "word_vectors": config.word_vectors,
                "retained": out / "retained.json",
            },
            [f"sim_{n}.{ext}" for n in ("vdist", "vsim", "ssim", "joint") for ext in ("json", "bin")],
            _stage_similarity,
        ),
        "cluster": (
            {
                "joint": out / "sim_joint.json",
                "joint_data": out / "sim_joint.bin",
                "annotations": config.annotations,
                **train_inputs,
            },
            ["themes.json", "theme_corpus.json"],
            _stage_cluster,
        ),
        "forest": (
            {**train_inputs, "theme_corpus": out / "theme_corpus.json"},
            ["forest.json"],
            _stage_forest,
        ),
        "tasks": (
            {
                **train_inputs,
                "annotations": config.annotations,
                **_feature_inputs("test_features", test_features),
                "test_annotations": test_annotations,
                "forest": out / "forest.json",
                "vcdl": out / "vcdl.json",
                "themes": out / "themes.json",
                "theme_corpus": out / "theme_corpus.json",
            },
            [
                f"reports/{name}.{ext}"
                for name in ("knsm", "map", "labelling")
                for ext in ("json", "csv")
            ],
            _stage_tasks,
        ),
    }


def run_pipeline(config: PipelineConfig, echo: Callable[[str], None] = print) -> RunResult:
    """Run all stages, skipping those whose inputs and parameters match
    the previous manifest and whose outputs still verify."""
    config.validate()
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = out / "manifest.json"
    previous = {}
    if manifest_path.exists():
        previous = json.loads(manifest_path.read_text())

    manifest = {
        "version": 1,
        "package_version": __version__,
        "parameters": {stage: config.stage_params(stage) for stage in STAGE_ORDER},
        "stages": {},
    }
    result = RunResult(manifest_path, manifest)

    params_chain: dict[str, dict] = {}
    for stage in STAGE_ORDER:
        params_chain[stage] = config.stage_params(stage)
        # a stage's cache key covers its own parameters plus every upstream
        # stage's, so any parameter change reruns the whole downstream chain
        key_params = dict(params_chain)
        try:
            inputs, outputs, compute = _stage_spec(config, out)[stage]
            input_hashes = {label: _sha256(Path(p)) for label, p in sorted(inputs.items())}
            old = previous.get("stages", {}).get(stage)
            fresh_needed = True
            if (
                old is not None
                and old.get("params") == key_params
                and old.get("inputs") == input_hashes
                and all((out / rel).exists() for rel in outputs)
                and all(_sha256(out / rel) == old.get("outputs", {}).get(rel) for rel in outputs)
            ):
                fresh_needed = False
            if fresh_needed:
                compute(config, out)
                result.stage_status[stage] = "computed"
            else:
                result.stage_status[stage] = "cached"
            manifest["stages"][stage] = {
                "params": key_params,
                "inputs": input_hashes,
                "outputs": {rel: _sha256(out / rel) for rel in outputs},
            }
            echo(f"[{result.stage_status[stage]:>8}] {stage}")
        except Exception as exc:
            raise StageError(stage, exc) from exc

    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return result


def _apply_overrides(raw: dict, overrides: list[str]) -> dict:
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override {item!r} is not of the form section.key=value")
        dotted, value = item.split("=", 1)
        keys = dotted.split(".")
        try:
            parsed = json.loads(value)
        except json.JSONDecodeError:
            parsed = value
        node = raw
        for key in keys[:-1]:
            node = node.setdefault(key, {})
        node[keys[-1]] = parsed
    return raw


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_filter(args: argparse.Namespace) -> int:
    features, annotations = _load_features_and_annotations(args.features, args.annotations)
    report = wknm.compute_vcdl_report(features, annotations, args.k_neighbors)
    Path(args.out_report).write_text(report.to_json())
    result = wknm.filter_tags(report, args.vcdl_threshold)
    wknm.write_filter_result(result, args.out_retained)
    print(f"retained {len(result.retained)} tags, removed {len(result.removed)}")
    return 0


def _cmd_similarity(args: argparse.Namespace) -> int:
    features, annotations = _load_features_and_annotations(args.features, args.annotations)
    if args.retained:
        retained = wknm.load_filter_result(args.retained).retained
    else:
        retained = annotations.tags
    vectors, missing = corpus.load_word_vectors(args.word_vectors, retained)
    if missing:
        print(f"warning: {len(missing)} retained tag(s) lack word vectors", file=sys.stderr)
    vdist = tagsim.visual_distance_matrix(retained, features, annotations)
    vsim = tagsim.distance_to_similarity(vdist)
    ssim = tagsim.semantic_similarity_matrix(retained, vectors)
    joint = tagsim.merge_similarity(vsim, ssim, args.alpha)
    prefix = Path(args.out_prefix)
    for name, matrix in (("vdist", vdist), ("vsim", vsim), ("ssim", ssim), ("joint", joint)):
        tagsim.save_similarity_matrix(matrix, prefix.parent / f"{prefix.name}_{name}.json")
    print(f"wrote 4 matrices over {len(retained)} tags")
    return 0


def _cmd_cluster(args: argparse.Namespace) -> int:
    joint = tagsim.load_similarity_matrix(args.similarity)
    suggestion = themecluster.suggest_num_themes(joint)
    print(f"eigengap suggests about {suggestion} themes (advisory)", file=sys.stderr)
    themes = themecluster.spectral_cluster(joint, args.num_themes, args.seed)
    themecluster.save_theme_assignment(themes, args.out_themes)
    if args.out_theme_corpus:
        if not (args.features and args.annotations):
            raise ValueError("--out-theme-corpus requires --features and --annotations")
        _, annotations = _load_features_and_annotations(args.features, args.annotations)
        theme_corpus = themecluster.relabel_corpus(annotations, themes, args.min_frequency)
        themecluster.save_theme_corpus(theme_corpus, args.out_theme_corpus)
    print(f"clustered {len(joint.tags)} tags into {themes.num_themes} themes")
    return 0


def _cmd_build_forest(args: argparse.Namespace) -> int:
    features = corpus.load_feature_matrix(args.features)
    theme_corpus = themecluster.load_theme_corpus(args.theme_corpus)
    params = themeforest.ForestParams(
        num_trees=args.trees,
        max_depth=args.max_depth,
        min_leaf=args.min_leaf,
        seed=args.seed,
    )
    forest = themeforest.build_forest(features, theme_corpus, params)
    themeforest.save_forest(forest, args.out)
    print(f"built {forest.num_trees} trees over {features.num_images} images")
    return 0


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        print(text, end="")


def _cmd_search_example(args: argparse.Namespace) -> int:
    forest = themeforest.load_forest(args.forest)
    features = corpus.load_feature_matrix(args.features)
    result = tasks.example_search(
        forest,
        features.data[args.query_index],
        args.top_k,
        query_id=features.image_ids[args.query_index],
    )
    _emit(
        {"query": result.query_id, "ranked": [[i, s] for i, s in result.ranked]}, args.out
    )
    return 0


def _cmd_search_keyword(args: argparse.Namespace) -> int:
    forest = themeforest.load_forest(args.forest)
    themes = themecluster.load_theme_assignment(args.themes)
    theme_corpus = themecluster.load_theme_corpus(args.theme_corpus)
    test_features = corpus.load_feature_matrix(args.test_features)
    result = tasks.keyword_search(forest, args.keyword, test_features, themes, theme_corpus)
    ranked = result.ranked[: args.top_k] if args.top_k else result.ranked
    _emit({"query": result.query_id, "ranked": [[i, s] for i, s in ranked]}, args.out)
    return 0


def _cmd_label(args: argparse.Namespace) -> int:
    forest = themeforest.load_forest(args.forest)
    vcdl_report = wknm.VcdlReport.from_json(Path(args.vcdl).read_text())
    _, train_annotations = _load_features_and_annotations(
        args.train_features, args.train_annotations
    )
    test_features = corpus.load_feature_matrix(args.test_features)
    indices = (
        [args.query_index] if args.query_index is not None else range(test_features.num_images)
    )
    labelled = {}
    for i in indices:
        result = tasks.label_image(
            forest,
            test_features.data[i],
            vcdl_report,
            args.top_m,
            args.max_tags,
            train_annotations,
            query_id=test_features.image_ids[i],
        )
        labelled[result.image] = [[t, v] for t, v in result.predicted]
    _emit({"labels": labelled}, args.out)
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    forest = themeforest.load_forest(args.forest)
    _, train_annotations = _load_features_and_annotations(
        args.train_features, args.train_annotations
    )
    test_features, test_annotations = _load_features_and_annotations(
        args.test_features, args.test_annotations
    )
    prefix = Path(args.out_prefix)

    if args.task == "knsm":
        query_tags = {}
        results = {}
        for i in range(test_features.num_images):
            qid = test_features.image_ids[i]
            query_tags[qid] = [test_annotations.tags[t] for t in test_annotations.tags_of(i)]
            results[qid] = tasks.example_search(forest, test_features.data[i], args.k_max, qid)
        report = tasks.knsm(query_tags, results, train_annotations, args.k_max)
    elif args.task == "map":
        if not (args.themes and args.theme_corpus):
            raise ValueError("--task map requires --themes and --theme-corpus")
        themes = themecluster.load_theme_assignment(args.themes)
        theme_corpus = themecluster.load_theme_corpus(args.theme_corpus)
        rankings = {}
        relevance = {}
        for theme_id in sorted(theme_corpus.theme_frequencies):
            rankings[str(theme_id)] = tasks.keyword_search(
                forest, theme_id, test_features, themes, theme_corpus
            )
            member_tags = themes.theme_to_tags[theme_id]
            relevance[str(theme_id)] = {
                i
                for i in range(test_features.num_images)
                if any(
                    test_annotations.has_tag(t)
                    and test_annotations.image_has_tag(i, test_annotations.tag_position(t))
                    for t in member_tags
                )
            }
        report = tasks.mean_average_precision(rankings, relevance)
    else:
        if not args.vcdl:
            raise ValueError("--task pr requires --vcdl")
        vcdl_report = wknm.VcdlReport.from_json(Path(args.vcdl).read_text())
        predictions = {
            i: tasks.label_image(
                forest,
                test_features.data[i],
                vcdl_report,
                args.top_m,
                args.max_tags,
                train_annotations,
                query_id=test_features.image_ids[i],
            )
            for i in range(test_features.num_images)
        }
        report = tasks.precision_recall(predictions, test_annotations)

    tasks.write_report(report, prefix.parent / f"{prefix.name}.json", prefix.parent / f"{prefix.name}.csv")
    print(json.dumps(report.aggregate, sort_keys=True))
    return 0


def _cmd_pipeline(args: argparse.Namespace) -> int:
    raw = json.loads(Path(args.config).read_text())
    raw = _apply_overrides(raw, args.override or [])
    config = PipelineConfig.from_dict(raw)
    try:
        result = run_pipeline(config)
    except StageError as exc:
        print(str(exc), file=sys.stderr)
        return STAGE_EXIT_CODES[exc.stage]
    if result.cache_hits:
        print(f"cache hits: {', '.join(result.cache_hits)}")
    print(f"manifest: {result.manifest_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="visualthemes",
        description="Discover visual themes from tagged image corpora and run search/labelling over them.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("filter", help="score tags by VCDL and threshold them")
    p.add_argument("--features", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--k-neighbors", type=int, default=10)
    p.add_argument("--vcdl-threshold", type=float, default=1.5)
    p.add_argument("--out-report", default="vcdl.json")
    p.add_argument("--out-retained", default="retained.json")
    p.set_defaults(func=_cmd_filter)

    p = sub.add_parser("similarity", help="build vdist/vsim/ssim/joint matrices")
    p.add_argument("--features", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--word-vectors", required=True)
    p.add_argument("--retained", help="filter output restricting the tag set")
    p.add_argument("--alpha", type=float, default=0.15)
    p.add_argument("--out-prefix", default="sim")
    p.set_defaults(func=_cmd_similarity)

    p = sub.add_parser("cluster", help="spectral-cluster tags into themes")
    p.add_argument("--similarity", required=True, help="joint similarity manifest")
    p.add_argument("--num-themes", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--features")
    p.add_argument("--annotations")
    p.add_argument("--min-frequency", type=int, default=0)
    p.add_argument("--out-themes", default="themes.json")
    p.add_argument("--out-theme-corpus")
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("build-forest", help="grow the theme forest")
    p.add_argument("--features", required=True)
    p.add_argument("--theme-corpus", required=True)
    p.add_argument("--trees", type=int, default=400)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-depth", type=int, default=20)
    p.add_argument("--min-leaf", type=int, default=5)
    p.add_argument("--out", default="forest.json")
    p.set_defaults(func=_cmd_build_forest)

    p = sub.add_parser("search-example", help="rank training images for a query image")
    p.add_argument("--forest", required=True)
    p.add_argument("--features", required=True, help="feature file holding the query row")
    p.add_argument("--query-index", type=int, required=True)
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_search_example)

    p = sub.add_parser("search-keyword", help="rank test images for a keyword")
    p.add_argument("--forest", required=True)
    p.add_argument("--keyword", required=True)
    p.add_argument("--themes", required=True)
    p.add_argument("--theme-corpus", required=True)
    p.add_argument("--test-features", required=True)
    p.add_argument("--top-k", type=int)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_search_keyword)

    p = sub.add_parser("label", help="predict tags for test images")
    p.add_argument("--forest", required=True)
    p.add_argument("--vcdl", required=True)
    p.add_argument("--train-features", required=True)
    p.add_argument("--train-annotations", required=True)
    p.add_argument("--test-features", required=True)
    p.add_argument("--query-index", type=int)
    p.add_argument("--top-m", type=int, default=3)
    p.add_argument("--max-tags", type=int, default=5)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_label)

    p = sub.add_parser("evaluate", help="run a task metric over a test split")
    p.add_argument("--task", choices=("knsm", "map", "pr"), required=True)
    p.add_argument("--forest", required=True)
    p.add_argument("--train-features", required=True)
    p.add_argument("--train-annotations", required=True)
    p.add_argument("--test-features", required=True)
    p.add_argument("--test-annotations", required=True)
    p.add_argument("--themes")
    p.add_argument("--theme-corpus")
    p.add_argument("--vcdl")
    p.add_argument("--k-max", type=int, default=10)
    p.add_argument("--top-m", type=int, default=3)
    p.add_argument("--max-tags", type=int, default=5)
    p.add_argument("--out-prefix", default="report")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("pipeline", help="run the full pipeline from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--override", action="append", metavar="SECTION.KEY=VALUE")
    p.set_defaults(func=_cmd_pipeline)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
