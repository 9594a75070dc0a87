"""Corpus and embedding I/O plus synthetic benchmark generation.

A corpus is a JSON Lines file ({"id", "text", "label", "split"}); embeddings
are a little-endian binary matrix whose row order is the corpus record order.
That pairing is by position (row i <-> line i), validated by count only.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import SPLITS, UNLABELED_SENTINEL, ClassVocabulary, UtteranceRecord
from .errors import (
    BadMagic,
    CountMismatch,
    DuplicateId,
    InvalidSpec,
    InvalidSplit,
    NonFiniteValue,
    ParseError,
    ZeroNormRow,
)
from .randomness import STREAM_SYNTH_CENTERS, STREAM_SYNTH_NOISE, generator

EMBEDDING_MAGIC = b"MNIDEMB1"
EMBEDDING_VERSION = 1


@dataclass
class Corpus:
    records: list[UtteranceRecord]
    vocabulary: ClassVocabulary

    def __post_init__(self) -> None:
        self.by_id: dict[str, UtteranceRecord] = {r.id: r for r in self.records}
        self._row: dict[str, int] = {r.id: i for i, r in enumerate(self.records)}

    def __len__(self) -> int:
        return len(self.records)

    def row_of(self, point_id: str) -> int:
        return self._row[point_id]

    def split_ids(self, split: str) -> list[str]:
        return [r.id for r in self.records if r.split == split]

    def has_gold(self, ids: list[str] | None = None) -> bool:
        records = self.records if ids is None else [self.by_id[i] for i in ids]
        return all(r.has_gold() for r in records)


@dataclass
class EmbeddingMatrix:
    """Float32 row-per-record matrix bound to the corpus ids it was loaded with."""

    values: np.ndarray
    ids: tuple[str, ...]
    normalized: bool = False

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.values.ndim != 2:
            raise ValueError("embedding values must be a 2-d array")
        if self.values.shape[0] != len(self.ids):
            raise CountMismatch(
                f"{self.values.shape[0]} rows vs {len(self.ids)} ids"
            )
        _check_finite(self.values)
        self._row = {point_id: i for i, point_id in enumerate(self.ids)}

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def row(self, point_id: str) -> np.ndarray:
        return self.values[self._row[point_id]]

    def rows(self, ids: list[str]) -> np.ndarray:
        return self.values[[self._row[i] for i in ids]]

    def has(self, point_id: str) -> bool:
        return point_id in self._row


def _check_finite(values: np.ndarray) -> None:
    if not np.all(np.isfinite(values)):
        row, col = np.argwhere(~np.isfinite(values))[0]
        raise NonFiniteValue(int(row), int(col))


def _normalize_rows(values: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(values, axis=1)
    zero = np.where(norms == 0.0)[0]
    if zero.size:
        raise ZeroNormRow(int(zero[0]))
    return (values / norms[:, None]).astype(np.float32)


def load_corpus(path: str | Path) -> Corpus:
    """Parse a JSONL corpus, building the vocabulary from its labels.

    Labels equal to the sentinel "?" (live mode) are kept on records but do
    not enter the vocabulary. known-at-start classes are those of the init
    split, which must always carry real labels.
    """
    records: list[UtteranceRecord] = []
    seen: set[str] = set()
    labels: list[str] = []
    init_labels: list[str] = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(lineno, f"invalid JSON: {exc.msg}") from exc
            try:
                point_id = str(obj["id"])
                text = str(obj["text"])
                label = str(obj["label"])
                split = str(obj["split"])
            except KeyError as exc:
                raise ParseError(lineno, f"missing key {exc.args[0]!r}") from exc
            if split not in SPLITS:
                raise InvalidSplit(lineno, split)
            if not label:
                raise ParseError(lineno, "empty label (use '?' for unlabeled)")
            if label == UNLABELED_SENTINEL and split == "init":
                raise ParseError(lineno, "init records must carry a gold label")
            if point_id in seen:
                raise DuplicateId(lineno, point_id)
            seen.add(point_id)
            if label != UNLABELED_SENTINEL:
                labels.append(label)
                if split == "init":
                    init_labels.append(label)
            records.append(
                UtteranceRecord(id=point_id, text=text, gold_label=label, split=split)
            )
    vocabulary = ClassVocabulary.from_labels(labels, init_labels)
    return Corpus(records=records, vocabulary=vocabulary)


def write_corpus(path: str | Path, corpus: Corpus) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for r in corpus.records:
            handle.write(
                json.dumps(
                    {"id": r.id, "text": r.text, "label": r.gold_label, "split": r.split},
                    ensure_ascii=False,
                )
                + "\n"
            )


def write_embeddings(path: str | Path, values: np.ndarray) -> None:
    """Write the binary embedding format (bit-exact round trip)."""
    values = np.asarray(values, dtype=np.float32)
    count, dim = values.shape
    with open(path, "wb") as handle:
        handle.write(EMBEDDING_MAGIC)
        handle.write(struct.pack("<IQI", EMBEDDING_VERSION, count, dim))
        handle.write(values.astype("<f4").tobytes(order="C"))


def load_embeddings(
    path: str | Path, corpus: Corpus, normalize: bool = True
) -> EmbeddingMatrix:
    """Load embeddings for ``corpus``, optionally L2-normalizing each row."""
    with open(path, "rb") as handle:
        magic = handle.read(len(EMBEDDING_MAGIC))
        if magic != EMBEDDING_MAGIC:
            raise BadMagic(f"expected {EMBEDDING_MAGIC!r}, got {magic!r}")
        header = handle.read(struct.calcsize("<IQI"))
        version, count, dim = struct.unpack("<IQI", header)
        if version != EMBEDDING_VERSION:
            raise BadMagic(f"unsupported embedding format version {version}")
        if count != len(corpus):
            raise CountMismatch(f"file has {count} rows, corpus has {len(corpus)}")
        if dim == 0:
            raise CountMismatch("embedding dimension must be positive")
        payload = handle.read(4 * count * dim)
        if len(payload) != 4 * count * dim:
            raise CountMismatch("embedding payload truncated")
    values = np.frombuffer(payload, dtype="<f4").reshape(count, dim).copy()
    _check_finite(values)
    if normalize:
        values = _normalize_rows(values)
    return EmbeddingMatrix(
        values=values, ids=tuple(r.id for r in corpus.records), normalized=normalize
    )


@dataclass
class SyntheticSpec:
    """Isotropic Gaussian blobs standing in for encoder embeddings.

    ``init_per_class`` points of each known class are tagged init (the
    few-shot seed), the last ``test_fraction`` of each class is held out as
    test, and everything else lands in the pool.
    """

    n_classes: int
    n_known: int
    points_per_class: int
    dim: int
    center_scale: float
    cluster_std: float
    seed: int
    init_per_class: int = 10
    test_fraction: float = 0.2

    def validate(self) -> None:
        if not (0 < self.n_known < self.n_classes):
            raise InvalidSpec("need 0 < n_known < n_classes")
        if self.points_per_class < 1 or self.dim < 1:
            raise InvalidSpec("points_per_class and dim must be positive")
        if self.center_scale <= 0 or self.cluster_std <= 0:
            raise InvalidSpec("center_scale and cluster_std must be positive")
        if self.init_per_class < 1:
            raise InvalidSpec("init_per_class must be positive")
        if not (0.0 <= self.test_fraction < 1.0):
            raise InvalidSpec("test_fraction must be in [0, 1)")
        n_test = math.ceil(self.points_per_class * self.test_fraction)
        if self.init_per_class + n_test > self.points_per_class:
            raise InvalidSpec(
                "points_per_class too small for init + test split "
                f"({self.init_per_class} + {n_test} > {self.points_per_class})"
            )

    @classmethod
    def from_dict(cls, obj: dict) -> "SyntheticSpec":
        try:
            return cls(**obj)
        except TypeError as exc:
            raise InvalidSpec(str(exc)) from exc


def generate_synthetic(spec: SyntheticSpec) -> tuple[Corpus, EmbeddingMatrix]:
    """Seed-deterministic synthetic corpus + raw (unnormalized) embeddings."""
    spec.validate()
    centers = (
        generator(spec.seed, STREAM_SYNTH_CENTERS).normal(
            size=(spec.n_classes, spec.dim)
        )
        * spec.center_scale
    )
    noise = generator(spec.seed, STREAM_SYNTH_NOISE).normal(
        size=(spec.n_classes, spec.points_per_class, spec.dim)
    )
    points = (centers[:, None, :] + spec.cluster_std * noise).astype(np.float32)

    n_test = math.ceil(spec.points_per_class * spec.test_fraction)
    records: list[UtteranceRecord] = []
    rows: list[np.ndarray] = []
    labels = [f"class_{c:03d}" for c in range(spec.n_classes)]
    for c in range(spec.n_classes):
        known = c < spec.n_known
        for j in range(spec.points_per_class):
            if known and j < spec.init_per_class:
                split = "init"
            elif j >= spec.points_per_class - n_test:
                split = "test"
            else:
                split = "pool"
            records.append(
                UtteranceRecord(
                    id=f"u{c:03d}_{j:04d}",
                    text=f"synthetic point {j} of {labels[c]}",
                    gold_label=labels[c],
                    split=split,
                )
            )
            rows.append(points[c, j])
    vocabulary = ClassVocabulary.from_labels(labels, labels[: spec.n_known])
    corpus = Corpus(records=records, vocabulary=vocabulary)
    matrix = EmbeddingMatrix(
        values=np.stack(rows), ids=tuple(r.id for r in records), normalized=False
    )
    return corpus, matrix


def normalized_copy(matrix: EmbeddingMatrix) -> EmbeddingMatrix:
    """L2-normalized view of a matrix, same row arithmetic as the file loader."""
    if matrix.normalized:
        return matrix
    return EmbeddingMatrix(
        values=_normalize_rows(matrix.values), ids=matrix.ids, normalized=True
    )
