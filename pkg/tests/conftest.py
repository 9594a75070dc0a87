"""Shared builders for hand-crafted corpora and oracle plumbing."""

from __future__ import annotations

import numpy as np
import pytest

from mnid.core import (
    PROVENANCE_INITIAL,
    BudgetLedger,
    ClassVocabulary,
    LabeledPool,
    OracleHandle,
    SimulatedGoldBackend,
    UtteranceRecord,
)
from mnid.ingest import Corpus, EmbeddingMatrix


def build_corpus(rows, known=None):
    """rows: list of (id, label, split, embedding); known: labels known at start.

    When ``known`` is omitted, the init split's labels are the known set.
    """
    records = []
    vectors = []
    for point_id, label, split, vec in rows:
        records.append(
            UtteranceRecord(id=point_id, text=f"text {point_id}", gold_label=label, split=split)
        )
        vectors.append(np.asarray(vec, dtype=np.float32))
    labels = [r.gold_label for r in records if r.gold_label != "?"]
    if known is None:
        known = [r.gold_label for r in records if r.split == "init"]
    vocabulary = ClassVocabulary.from_labels(labels, known)
    corpus = Corpus(records=records, vocabulary=vocabulary)
    matrix = EmbeddingMatrix(
        values=np.stack(vectors), ids=tuple(r.id for r in records), normalized=False
    )
    return corpus, matrix


def build_oracle(corpus, total, preload_init=True):
    """Simulated oracle over ``corpus`` with budget ``total``."""
    vocab = ClassVocabulary.from_labels(
        corpus.vocabulary.labels,
        [corpus.vocabulary.label(i) for i in sorted(corpus.vocabulary.known_at_start)],
    )
    pool = LabeledPool()
    init_ids = corpus.split_ids("init")
    ledger = BudgetLedger(total=total, spent=len(init_ids) if preload_init else 0)
    if preload_init:
        for point_id in init_ids:
            pool.add(point_id, vocab.index(corpus.by_id[point_id].gold_label), PROVENANCE_INITIAL)
    oracle = OracleHandle(SimulatedGoldBackend(), corpus.by_id, vocab, pool, ledger)
    return oracle


@pytest.fixture
def two_blob_corpus():
    """Two known classes, linearly separable, plus a far-away unknown class."""
    rows = []
    for j in range(5):
        rows.append((f"a{j}", "alpha", "init", [-1.0, 0.1 * j]))
        rows.append((f"b{j}", "beta", "init", [1.0, 0.1 * j]))
    for j in range(6):
        rows.append((f"p{j}", "alpha" if j % 2 else "beta", "pool",
                     [(-1.0 if j % 2 else 1.0), 0.05 * j]))
        rows.append((f"u{j}", "gamma", "pool", [0.0, 10.0 + 0.05 * j]))
    for j in range(4):
        rows.append((f"t{j}", ["alpha", "beta", "gamma", "gamma"][j], "test",
                     [[-1.0, 0.2], [1.0, 0.2], [0.0, 10.1], [0.0, 10.2]][j]))
    return build_corpus(rows)
