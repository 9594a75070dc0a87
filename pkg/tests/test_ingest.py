"""Corpus / embedding I/O and synthetic generation."""

import json

import numpy as np
import pytest

from mnid.errors import (
    BadMagic,
    CountMismatch,
    DuplicateId,
    InvalidSpec,
    ParseError,
    ZeroNormRow,
)
from mnid.ingest import (
    SyntheticSpec,
    generate_synthetic,
    load_corpus,
    load_embeddings,
    write_corpus,
    write_embeddings,
)


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(json.dumps(row) + "\n")


class TestLoadCorpus:
    def test_three_line_file(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_jsonl(path, [
            {"id": "a", "text": "hi", "label": "x", "split": "init"},
            {"id": "b", "text": "ho", "label": "y", "split": "pool"},
            {"id": "c", "text": "he", "label": "x", "split": "test"},
        ])
        corpus = load_corpus(path)
        assert len(corpus) == 3
        assert len(corpus.vocabulary) == 2
        assert corpus.vocabulary.known_at_start == {corpus.vocabulary.index("x")}

    def test_duplicate_id_reports_line(self, tmp_path):
        path = tmp_path / "c.jsonl"
        rows = [{"id": f"u{j}", "text": "t", "label": "x", "split": "pool"} for j in range(8)]
        rows[0]["split"] = "init"
        rows[6]["id"] = "u1"  # line 7 duplicates line 2
        write_jsonl(path, rows)
        with pytest.raises(DuplicateId) as err:
            load_corpus(path)
        assert err.value.line == 7
        assert err.value.point_id == "u1"

    def test_invalid_split_and_json(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_jsonl(path, [{"id": "a", "text": "t", "label": "x", "split": "train"}])
        with pytest.raises(Exception) as err:
            load_corpus(path)
        assert getattr(err.value, "line", None) == 1
        path.write_text('{"id": broken\n', encoding="utf-8")
        with pytest.raises(ParseError):
            load_corpus(path)

    def test_benchmark_scale_counts(self, tmp_path):
        # 7 intent classes, 5 known at start; 50 init + 12050 pool + 2384 test
        labels = [f"intent_{k}" for k in range(7)]
        rows = []
        for j in range(50):
            rows.append({"id": f"i{j}", "text": "t", "label": labels[j % 5], "split": "init"})
        for j in range(12050):
            rows.append({"id": f"p{j}", "text": "t", "label": labels[j % 7], "split": "pool"})
        for j in range(2384):
            rows.append({"id": f"t{j}", "text": "t", "label": labels[j % 7], "split": "test"})
        path = tmp_path / "large.jsonl"
        write_jsonl(path, rows)
        corpus = load_corpus(path)
        assert len(corpus) == 50 + 12050 + 2384
        assert len(corpus.vocabulary) == 7
        assert len(corpus.vocabulary.known_at_start) == 5


class TestEmbeddingsIO:
    def test_load_values_unnormalized(self, tmp_path):
        corpus_path = tmp_path / "c.jsonl"
        write_jsonl(corpus_path, [
            {"id": f"r{j}", "text": "t", "label": "x", "split": "pool" if j else "init"}
            for j in range(4)
        ])
        corpus = load_corpus(corpus_path)
        values = np.array([[1, 0], [0, 1], [3, 4], [0, 0]], dtype=np.float32)
        emb_path = tmp_path / "e.bin"
        write_embeddings(emb_path, values)
        matrix = load_embeddings(emb_path, corpus, normalize=False)
        assert matrix.n == 4 and matrix.dim == 2
        assert np.array_equal(matrix.row("r2"), np.array([3, 4], dtype=np.float32))

    def test_zero_row_forbidden_when_normalizing(self, tmp_path):
        corpus_path = tmp_path / "c.jsonl"
        write_jsonl(corpus_path, [
            {"id": f"r{j}", "text": "t", "label": "x", "split": "pool" if j else "init"}
            for j in range(4)
        ])
        corpus = load_corpus(corpus_path)
        emb_path = tmp_path / "e.bin"
        write_embeddings(emb_path, np.array([[1, 0], [0, 1], [3, 4], [0, 0]], np.float32))
        with pytest.raises(ZeroNormRow) as err:
            load_embeddings(emb_path, corpus, normalize=True)
        assert err.value.row == 3

    def test_count_mismatch(self, tmp_path):
        corpus_path = tmp_path / "c.jsonl"
        write_jsonl(corpus_path, [
            {"id": f"r{j}", "text": "t", "label": "x", "split": "pool" if j else "init"}
            for j in range(4)
        ])
        corpus = load_corpus(corpus_path)
        emb_path = tmp_path / "e.bin"
        write_embeddings(emb_path, np.zeros((5, 2), np.float32) + 1.0)
        with pytest.raises(CountMismatch):
            load_embeddings(emb_path, corpus, normalize=False)

    def test_bad_magic(self, tmp_path):
        corpus_path = tmp_path / "c.jsonl"
        write_jsonl(corpus_path, [{"id": "a", "text": "t", "label": "x", "split": "init"}])
        corpus = load_corpus(corpus_path)
        bad = tmp_path / "bad.bin"
        bad.write_bytes(b"NOTMAGIC" + b"\0" * 32)
        with pytest.raises(BadMagic):
            load_embeddings(bad, corpus, normalize=False)

    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(5)
        values = rng.normal(size=(37, 9)).astype(np.float32)
        corpus_path = tmp_path / "c.jsonl"
        write_jsonl(corpus_path, [
            {"id": f"r{j}", "text": "t", "label": "x", "split": "pool" if j else "init"}
            for j in range(37)
        ])
        corpus = load_corpus(corpus_path)
        emb_path = tmp_path / "e.bin"
        write_embeddings(emb_path, values)
        loaded = load_embeddings(emb_path, corpus, normalize=False)
        assert loaded.values.tobytes() == values.tobytes()


def silhouette_oracle(values, labels):
    """Direct-formula mean silhouette over all points (independent oracle)."""
    n = len(labels)
    scores = []
    for i in range(n):
        same = [j for j in range(n) if labels[j] == labels[i] and j != i]
        a = np.mean([np.linalg.norm(values[i] - values[j]) for j in same])
        b = min(
            np.mean([np.linalg.norm(values[i] - values[j])
                     for j in range(n) if labels[j] == other])
            for other in set(labels) - {labels[i]}
        )
        scores.append((b - a) / max(a, b))
    return float(np.mean(scores))


class TestSynthetic:
    def test_determinism_byte_identical(self):
        spec = SyntheticSpec(n_classes=2, n_known=1, points_per_class=10, dim=2,
                             center_scale=10.0, cluster_std=0.1, seed=7,
                             init_per_class=2)
        c1, m1 = generate_synthetic(spec)
        c2, m2 = generate_synthetic(spec)
        assert m1.values.tobytes() == m2.values.tobytes()
        assert [r.id for r in c1.records] == [r.id for r in c2.records]
        assert [r.split for r in c1.records] == [r.split for r in c2.records]

    def test_all_known_is_invalid(self):
        spec = SyntheticSpec(n_classes=3, n_known=3, points_per_class=10, dim=2,
                             center_scale=1.0, cluster_std=0.1, seed=0)
        with pytest.raises(InvalidSpec):
            generate_synthetic(spec)

    def test_benchmark_shape_and_silhouette(self):
        spec = SyntheticSpec(n_classes=20, n_known=5, points_per_class=100, dim=16,
                             center_scale=1.0, cluster_std=0.05, seed=1)
        corpus, matrix = generate_synthetic(spec)
        assert len(corpus) == 2000
        assert len(corpus.vocabulary.unknown_at_start()) == 15
        # Subsample for the O(n^2) oracle; the partition is the gold one.
        keep = np.random.default_rng(0).permutation(2000)[:300]
        labels = [corpus.records[i].gold_label for i in keep]
        assert silhouette_oracle(matrix.values[keep], labels) >= 0.5

    def test_split_partition_exact(self):
        spec = SyntheticSpec(n_classes=4, n_known=2, points_per_class=20, dim=3,
                             center_scale=2.0, cluster_std=0.2, seed=3,
                             init_per_class=4)
        corpus, _ = generate_synthetic(spec)
        known = corpus.vocabulary.known_at_start
        counts = {"init": 0, "pool": 0, "test": 0}
        for record in corpus.records:
            counts[record.split] += 1
            if record.split == "init":
                assert corpus.vocabulary.index(record.gold_label) in known
        assert counts["init"] == 2 * 4
        assert counts["test"] == 4 * 4  # ceil(20 * 0.2) per class
        assert sum(counts.values()) == len(corpus)

    def test_corpus_file_round_trip(self, tmp_path):
        spec = SyntheticSpec(n_classes=3, n_known=1, points_per_class=8, dim=2,
                             center_scale=1.0, cluster_std=0.1, seed=11,
                             init_per_class=2)
        corpus, matrix = generate_synthetic(spec)
        write_corpus(tmp_path / "c.jsonl", corpus)
        write_embeddings(tmp_path / "e.bin", matrix.values)
        reloaded = load_corpus(tmp_path / "c.jsonl")
        assert [r.id for r in reloaded.records] == [r.id for r in corpus.records]
        matrix2 = load_embeddings(tmp_path / "e.bin", reloaded, normalize=False)
        assert matrix2.values.tobytes() == matrix.values.tobytes()
