"""Pipeline orchestration, stage caching and CLI subcommands."""

import json

import pytest

from visualthemes.cli import PipelineConfig, main, run_pipeline
from visualthemes.corpus import SyntheticSpec

SPEC = SyntheticSpec(3, 12, 4, 3, 0.05, seed=41)


def _config_dict(features, annotations, vectors, out_dir, **tweaks):
    raw = {
        "paths": {
            "features": str(features),
            "annotations": str(annotations),
            "word_vectors": str(vectors),
            "output_dir": str(out_dir),
        },
        "wknm": {"k": 5, "vcdl_threshold": 0.5},
        "similarity": {"alpha": 0.5},
        "cluster": {"num_themes": 3, "min_frequency": 0, "seed": 7},
        "forest": {"num_trees": 8, "max_depth": 8, "min_leaf": 2, "seed": 3},
        "tasks": {"top_k": 5, "k_max": 5, "top_m": 3, "max_tags": 3},
    }
    for dotted, value in tweaks.items():
        section, key = dotted.split("__")
        raw[section][key] = value
    return raw


@pytest.fixture
def pipeline_setup(write_corpus, tmp_path):
    features, annotations, vectors = write_corpus(SPEC)
    out_dir = tmp_path / "out"
    return _config_dict(features, annotations, vectors, out_dir), out_dir


class TestRunPipeline:
    def test_manifest_lists_all_five_stages(self, pipeline_setup):
        raw, out_dir = pipeline_setup
        result = run_pipeline(PipelineConfig.from_dict(raw), echo=lambda _: None)
        manifest = json.loads((out_dir / "manifest.json").read_text())
        assert sorted(manifest["stages"]) == sorted(
            ["filter", "similarity", "cluster", "forest", "tasks"]
        )
        assert result.stage_status == {s: "computed" for s in manifest["stages"]}
        for stage in manifest["stages"].values():
            for rel in stage["outputs"]:
                assert (out_dir / rel).exists()

    def test_rerun_hits_cache_and_keeps_manifest_bytes(self, pipeline_setup):
        raw, out_dir = pipeline_setup
        config = PipelineConfig.from_dict(raw)
        run_pipeline(config, echo=lambda _: None)
        first_manifest = (out_dir / "manifest.json").read_bytes()
        result = run_pipeline(config, echo=lambda _: None)
        assert result.cache_hits == list(result.stage_status)  # every stage cached
        assert (out_dir / "manifest.json").read_bytes() == first_manifest

    def test_alpha_change_recomputes_downstream_only(self, pipeline_setup):
        raw, _ = pipeline_setup
        run_pipeline(PipelineConfig.from_dict(raw), echo=lambda _: None)
        raw["similarity"]["alpha"] = 0.25
        result = run_pipeline(PipelineConfig.from_dict(raw), echo=lambda _: None)
        assert result.stage_status["filter"] == "cached"
        for stage in ("similarity", "cluster", "forest", "tasks"):
            assert result.stage_status[stage] == "computed"

    def test_identical_runs_are_byte_identical(self, write_corpus, tmp_path):
        features, annotations, vectors = write_corpus(SPEC)
        outputs = []
        for name in ("run_a", "run_b"):
            out_dir = tmp_path / name
            raw = _config_dict(features, annotations, vectors, out_dir)
            run_pipeline(PipelineConfig.from_dict(raw), echo=lambda _: None)
            outputs.append(out_dir)
        a, b = outputs
        files_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
        files_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
        assert files_a == files_b
        for rel in files_a:
            assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel

    def test_stage_failure_names_stage(self, pipeline_setup):
        from visualthemes.cli import StageError

        raw, _ = pipeline_setup
        raw["cluster"]["num_themes"] = 200  # more themes than retained tags
        with pytest.raises(StageError) as err:
            run_pipeline(PipelineConfig.from_dict(raw), echo=lambda _: None)
        assert err.value.stage == "cluster"

    def test_config_validation(self, pipeline_setup):
        raw, _ = pipeline_setup
        raw["similarity"]["alpha"] = 1.5
        with pytest.raises(ValueError, match="alpha"):
            PipelineConfig.from_dict(raw)
        raw["similarity"]["alpha"] = 0.5
        raw["paths"]["features"] = "/nonexistent/features.json"
        with pytest.raises(FileNotFoundError):
            PipelineConfig.from_dict(raw)


class TestCliCommands:
    def test_pipeline_command_with_override(self, pipeline_setup, tmp_path, capsys):
        raw, out_dir = pipeline_setup
        config_path = tmp_path / "cfg.json"
        config_path.write_text(json.dumps(raw))
        code = main(
            ["pipeline", "--config", str(config_path), "--override", "forest.num_trees=4"]
        )
        assert code == 0
        manifest = json.loads((out_dir / "manifest.json").read_text())
        assert manifest["parameters"]["forest"]["num_trees"] == 4

    def test_pipeline_failure_exit_code(self, pipeline_setup, tmp_path, capsys):
        raw, _ = pipeline_setup
        raw["cluster"]["num_themes"] = 200
        config_path = tmp_path / "cfg.json"
        config_path.write_text(json.dumps(raw))
        assert main(["pipeline", "--config", str(config_path)]) == 5  # cluster stage

    def test_stagewise_commands_compose(self, write_corpus, tmp_path, capsys):
        features, annotations, vectors = write_corpus(SPEC)
        out = tmp_path / "artifacts"
        out.mkdir()

        assert main([
            "filter",
            "--features", str(features),
            "--annotations", str(annotations),
            "--k-neighbors", "5",
            "--vcdl-threshold", "0.5",
            "--out-report", str(out / "vcdl.json"),
            "--out-retained", str(out / "retained.json"),
        ]) == 0

        assert main([
            "similarity",
            "--features", str(features),
            "--annotations", str(annotations),
            "--word-vectors", str(vectors),
            "--retained", str(out / "retained.json"),
            "--alpha", "0.5",
            "--out-prefix", str(out / "sim"),
        ]) == 0
        assert (out / "sim_joint.json").exists()

        assert main([
            "cluster",
            "--similarity", str(out / "sim_joint.json"),
            "--num-themes", "3",
            "--seed", "7",
            "--features", str(features),
            "--annotations", str(annotations),
            "--out-themes", str(out / "themes.json"),
            "--out-theme-corpus", str(out / "theme_corpus.json"),
        ]) == 0

        assert main([
            "build-forest",
            "--features", str(features),
            "--theme-corpus", str(out / "theme_corpus.json"),
            "--trees", "8",
            "--seed", "3",
            "--out", str(out / "forest.json"),
        ]) == 0

        assert main([
            "search-example",
            "--forest", str(out / "forest.json"),
            "--features", str(features),
            "--query-index", "0",
            "--top-k", "3",
            "--out", str(out / "search.json"),
        ]) == 0
        ranked = json.loads((out / "search.json").read_text())["ranked"]
        assert 1 <= len(ranked) <= 3

        themes = json.loads((out / "themes.json").read_text())
        a_tag = themes["themes"]["0"][0]
        assert main([
            "search-keyword",
            "--forest", str(out / "forest.json"),
            "--keyword", a_tag,
            "--themes", str(out / "themes.json"),
            "--theme-corpus", str(out / "theme_corpus.json"),
            "--test-features", str(features),
            "--top-k", "5",
            "--out", str(out / "keyword.json"),
        ]) == 0

        assert main([
            "label",
            "--forest", str(out / "forest.json"),
            "--vcdl", str(out / "vcdl.json"),
            "--train-features", str(features),
            "--train-annotations", str(annotations),
            "--test-features", str(features),
            "--query-index", "0",
            "--top-m", "3",
            "--max-tags", "3",
            "--out", str(out / "labels.json"),
        ]) == 0
        labels = json.loads((out / "labels.json").read_text())["labels"]
        assert len(labels) == 1

        for task, extra in (
            ("knsm", []),
            ("map", ["--themes", str(out / "themes.json"),
                     "--theme-corpus", str(out / "theme_corpus.json")]),
            ("pr", ["--vcdl", str(out / "vcdl.json")]),
        ):
            assert main([
                "evaluate",
                "--task", task,
                "--forest", str(out / "forest.json"),
                "--train-features", str(features),
                "--train-annotations", str(annotations),
                "--test-features", str(features),
                "--test-annotations", str(annotations),
                "--out-prefix", str(out / f"report_{task}"),
                *extra,
            ]) == 0
            assert (out / f"report_{task}.json").exists()
            assert (out / f"report_{task}.csv").exists()

    def test_bad_inputs_exit_code_two(self, tmp_path, capsys):
        assert main([
            "filter",
            "--features", str(tmp_path / "missing.json"),
            "--annotations", str(tmp_path / "missing.jsonl"),
        ]) == 2
