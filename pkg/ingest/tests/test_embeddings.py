"""Embedding subset export: selection, sidecar, format errors."""

import numpy as np
import pytest

from themeingest.embeddings import export_embedding_subset, read_vocabulary


def make_source(path, words, dim=4, seed=0):
    rng = np.random.default_rng(seed)
    lines = [f"{len(words)} {dim}"]
    for word in words:
        coords = " ".join(f"{v:.6f}" for v in rng.standard_normal(dim))
        lines.append(f"{word} {coords}")
    path.write_text("\n".join(lines) + "\n")
    return path


class TestExportEmbeddingSubset:
    def test_subset_with_missing_sidecar(self, tmp_path, capsys):
        source = make_source(tmp_path / "big.txt", [f"w{i}" for i in range(40)])
        vocab = [f"w{i}" for i in range(25)] + ["ghost1", "ghost2"]
        out = tmp_path / "subset.txt"
        count, missing = export_embedding_subset(source, vocab, out)
        assert count == 25
        assert missing == frozenset({"ghost1", "ghost2"})
        header = out.read_text().splitlines()[0]
        assert header == "25 4"
        sidecar = (tmp_path / "subset.txt.missing").read_text().split()
        assert sorted(sidecar) == ["ghost1", "ghost2"]
        assert "ghost1" in capsys.readouterr().err

    def test_empty_vocabulary_rejected(self, tmp_path):
        source = make_source(tmp_path / "big.txt", ["w0"])
        with pytest.raises(ValueError, match="empty vocabulary"):
            export_embedding_subset(source, [], tmp_path / "out.txt")

    def test_nothing_found_rejected(self, tmp_path):
        source = make_source(tmp_path / "big.txt", ["w0", "w1"])
        with pytest.raises(ValueError, match="none of the"):
            export_embedding_subset(source, ["ghost"], tmp_path / "out.txt")

    def test_dimension_mismatch_rejected(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("2 3\nw0 1.0 2.0 3.0\nw1 1.0 2.0\n")
        with pytest.raises(ValueError, match="coordinates"):
            export_embedding_subset(path, ["w0", "w1"], tmp_path / "out.txt")

    def test_case_folding_first_occurrence_wins(self, tmp_path):
        path = tmp_path / "src.txt"
        path.write_text("2 2\nCat 1.0 0.0\ncat 9.0 9.0\n")
        out = tmp_path / "out.txt"
        export_embedding_subset(path, ["cat"], out)
        assert out.read_text().splitlines()[1] == "cat 1.0 0.0"


class TestReadVocabulary:
    def test_dedupe_lowercase_order(self, tmp_path):
        path = tmp_path / "vocab.txt"
        path.write_text("Cat\n\ndog\ncat\n")
        assert read_vocabulary(path) == ["cat", "dog"]

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "vocab.txt"
        path.write_text("\n\n")
        with pytest.raises(ValueError, match="no tags"):
            read_vocabulary(path)
