"""Metrics against direct-formula oracles."""

import numpy as np
import pytest

from conftest import build_corpus
from mnid.core import LabeledPool
from mnid.errors import LengthMismatch
from mnid.evaluation import (
    accuracy_macro_f1,
    discovery_rate,
    mcnemar,
    silver_precision,
)


def oracle_accuracy_macro_f1(pred, gold):
    """Plain-loop oracle, independent of the vectorized implementation."""
    correct = sum(1 for p, g in zip(pred, gold) if p == g)
    accuracy = correct / len(gold)
    f1s = []
    for cls in sorted(set(gold)):
        tp = sum(1 for p, g in zip(pred, gold) if p == cls and g == cls)
        fp = sum(1 for p, g in zip(pred, gold) if p == cls and g != cls)
        fn = sum(1 for p, g in zip(pred, gold) if p != cls and g == cls)
        if tp == 0:
            f1s.append(0.0)
        else:
            precision = tp / (tp + fp)
            recall = tp / (tp + fn)
            f1s.append(2 * precision * recall / (precision + recall))
    return accuracy, sum(f1s) / len(f1s)


class TestAccuracyMacroF1:
    def test_perfect(self):
        assert accuracy_macro_f1([0, 1, 2], [0, 1, 2]) == (1.0, 1.0)

    def test_hand_example(self):
        accuracy, f1 = accuracy_macro_f1([0, 1, 1, 1], [0, 0, 1, 1])
        assert accuracy == pytest.approx(0.75)
        assert f1 == pytest.approx((2 / 3 + 0.8) / 2, abs=1e-12)
        assert f1 == pytest.approx(0.7333, abs=5e-5)

    def test_total_miss(self):
        accuracy, f1 = accuracy_macro_f1([1, 1, 1], [0, 0, 0])
        assert accuracy == 0.0
        assert f1 == 0.0

    def test_against_oracle_on_random_cases(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            n = int(rng.integers(1, 40))
            c = int(rng.integers(1, 6))
            gold = rng.integers(0, c, size=n).tolist()
            pred = rng.integers(0, c + 1, size=n).tolist()
            got = accuracy_macro_f1(pred, gold)
            want = oracle_accuracy_macro_f1(pred, gold)
            assert got[0] == pytest.approx(want[0], abs=1e-12)
            assert got[1] == pytest.approx(want[1], abs=1e-12)

    def test_relabeling_invariance(self):
        rng = np.random.default_rng(23)
        gold = rng.integers(0, 4, size=30).tolist()
        pred = rng.integers(0, 4, size=30).tolist()
        base = accuracy_macro_f1(pred, gold)
        mapping = {0: 7, 1: 3, 2: 9, 3: 0}
        swapped = accuracy_macro_f1(
            [mapping[p] for p in pred], [mapping[g] for g in gold]
        )
        assert swapped == pytest.approx(base)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            accuracy_macro_f1([0], [0, 1])
        with pytest.raises(LengthMismatch):
            accuracy_macro_f1([], [])


def discordant_vectors(b, c):
    """Predictions where model A wins `b` points and model B wins `c`."""
    gold = [0] * (b + c)
    pred_a = [0] * b + [1] * c
    pred_b = [1] * b + [0] * c
    return pred_a, pred_b, gold


class TestMcnemar:
    def test_symmetric_discordance(self):
        pred_a, pred_b, gold = discordant_vectors(5, 5)
        assert mcnemar(pred_a, pred_b, gold) == (0.0, False)

    def test_2_8(self):
        pred_a, pred_b, gold = discordant_vectors(2, 8)
        chi, significant = mcnemar(pred_a, pred_b, gold)
        assert chi == pytest.approx(2.5, abs=1e-12)
        assert significant is False

    def test_1_14(self):
        pred_a, pred_b, gold = discordant_vectors(1, 14)
        chi, significant = mcnemar(pred_a, pred_b, gold)
        assert chi == pytest.approx(9.6, abs=1e-12)
        assert significant is True

    def test_no_discordance(self):
        assert mcnemar([0, 1], [0, 1], [0, 0]) == (0.0, False)

    def test_swap_symmetry(self):
        rng = np.random.default_rng(31)
        gold = rng.integers(0, 3, size=60).tolist()
        pred_a = rng.integers(0, 3, size=60).tolist()
        pred_b = rng.integers(0, 3, size=60).tolist()
        assert mcnemar(pred_a, pred_b, gold)[0] == mcnemar(pred_b, pred_a, gold)[0]


class TestDiscoveryRate:
    def _corpus(self):
        rows = [("i0", "k0", "init", [0.0]), ("i1", "k1", "init", [1.0])]
        for j, label in enumerate(["n0", "n1", "n2"]):
            rows.append((f"p{j}", label, "pool", [float(j)]))
        return build_corpus(rows)

    def test_counts_non_silver_unknowns(self):
        corpus, _ = self._corpus()
        vocab = corpus.vocabulary
        pool = LabeledPool()
        pool.add("i0", vocab.index("k0"), "initial")
        pool.add("p0", vocab.index("n0"), "ncd")
        pool.add("p1", vocab.index("n1"), "silver")  # silver never counts
        found, total, rate = discovery_rate(pool, vocab)
        assert (found, total) == (1, 3)
        assert rate == pytest.approx(1 / 3)

    def test_all_found(self):
        corpus, _ = self._corpus()
        vocab = corpus.vocabulary
        pool = LabeledPool()
        for j, label in enumerate(["n0", "n1", "n2"]):
            pool.add(f"p{j}", vocab.index(label), "gold")
        assert discovery_rate(pool, vocab) == (3, 3, 1.0)


class TestSilverPrecision:
    def test_absent_when_no_silver(self):
        corpus, _ = build_corpus([("i0", "k", "init", [0.0]), ("p0", "n", "pool", [1.0])])
        pool = LabeledPool()
        pool.add("p0", corpus.vocabulary.index("n"), "gold")
        assert silver_precision(pool, corpus) is None

    def test_mixed_precision(self):
        rows = [("i0", "k", "init", [0.0])]
        for j in range(4):
            rows.append((f"s{j}", "n0" if j < 3 else "n1", "pool", [float(j)]))
        corpus, _ = build_corpus(rows)
        vocab = corpus.vocabulary
        pool = LabeledPool()
        for j in range(4):
            pool.add(f"s{j}", vocab.index("n0"), "silver")  # s3 is wrong
        summary = silver_precision(pool, corpus)
        assert summary.count == 4
        assert summary.precision == pytest.approx(0.75)
        assert summary.mean_points_per_class == pytest.approx(4.0)
