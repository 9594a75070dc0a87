"""Shared domain types: records, vocabulary, budget ledger, labeled pool, oracle.

Every gold label in the pipeline is obtained through an :class:`OracleHandle`,
which validates the batch, lets a backend answer it (copying gold labels in
simulation, or blocking on a human queue in live mode), charges the budget
ledger, and files the labels into the labeled pool. Silver labels bypass the
oracle entirely and are never charged.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

from .errors import (
    AlreadyLabeled,
    BudgetExhausted,
    MissingGold,
    UnknownPoint,
)

SPLITS = ("init", "pool", "test")

#: Gold-label sentinel for live-mode corpora whose pool/test labels are unknown.
UNLABELED_SENTINEL = "?"

PROVENANCE_INITIAL = "initial"
PROVENANCE_NCD = "ncd"
PROVENANCE_CQBA = "cqba"
PROVENANCE_GOLD = "gold"
PROVENANCE_SILVER = "silver"
PROVENANCES = (
    PROVENANCE_INITIAL,
    PROVENANCE_NCD,
    PROVENANCE_CQBA,
    PROVENANCE_GOLD,
    PROVENANCE_SILVER,
)


@dataclass(frozen=True)
class UtteranceRecord:
    id: str
    text: str
    gold_label: str
    split: str

    def has_gold(self) -> bool:
        return self.gold_label != UNLABELED_SENTINEL


class ClassVocabulary:
    """Bidirectional label/index map with an initially-known subset flag."""

    def __init__(self) -> None:
        self._index: dict[str, int] = {}
        self._labels: list[str] = []
        self._known: set[int] = set()

    @classmethod
    def from_labels(cls, labels: Iterable[str], known: Iterable[str]) -> "ClassVocabulary":
        vocab = cls()
        for label in labels:
            vocab.ensure(label)
        for label in known:
            vocab._known.add(vocab.ensure(label))
        return vocab

    def ensure(self, label: str) -> int:
        """Index of ``label``, adding it (as unknown-at-start) if new."""
        if label == UNLABELED_SENTINEL:
            raise ValueError("the unlabeled sentinel is not a class label")
        idx = self._index.get(label)
        if idx is None:
            idx = len(self._labels)
            self._index[label] = idx
            self._labels.append(label)
        return idx

    def index(self, label: str) -> int:
        return self._index[label]

    def label(self, idx: int) -> str:
        return self._labels[idx]

    def __contains__(self, label: str) -> bool:
        return label in self._index

    def __len__(self) -> int:
        return len(self._labels)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self._labels)

    @property
    def known_at_start(self) -> frozenset[int]:
        return frozenset(self._known)

    def unknown_at_start(self) -> frozenset[int]:
        return frozenset(range(len(self._labels))) - self.known_at_start


@dataclass
class BudgetEvent:
    phase: str
    count: int
    spent_after: int


@dataclass
class BudgetLedger:
    """Total gold budget (initial labels count as pre-spent) and spend trace."""

    total: int
    spent: int = 0
    trace: list[BudgetEvent] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.total < 0 or self.spent < 0:
            raise ValueError("budget counters must be non-negative")
        if self.spent > self.total:
            raise BudgetExhausted(
                f"initial spend {self.spent} exceeds total budget {self.total}"
            )

    @property
    def remaining(self) -> int:
        return self.total - self.spent

    def charge(self, n: int) -> None:
        if n > self.remaining:
            raise BudgetExhausted(f"charge of {n} exceeds remaining {self.remaining}")
        self.spent += n

    def record(self, phase: str, count: int) -> None:
        self.trace.append(BudgetEvent(phase=phase, count=count, spent_after=self.spent))


def remaining(ledger: BudgetLedger) -> int:
    """Unspent gold-annotation budget."""
    return ledger.remaining


@dataclass(frozen=True)
class PoolEntry:
    label: int
    provenance: str


class LabeledPool:
    """The growing labeled set; at most one entry per point."""

    def __init__(self) -> None:
        self._entries: dict[str, PoolEntry] = {}

    def add(self, point_id: str, label: int, provenance: str) -> None:
        if provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {provenance!r}")
        if point_id in self._entries:
            raise AlreadyLabeled(f"point {point_id!r} already labeled")
        self._entries[point_id] = PoolEntry(label=label, provenance=provenance)

    def __contains__(self, point_id: str) -> bool:
        return point_id in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, point_id: str) -> PoolEntry:
        return self._entries[point_id]

    def items(self) -> Iterable[tuple[str, PoolEntry]]:
        return self._entries.items()

    def ids(self) -> list[str]:
        return list(self._entries)

    def labels_present(self) -> set[int]:
        return {entry.label for entry in self._entries.values()}

    def non_silver_count(self) -> int:
        return sum(1 for e in self._entries.values() if e.provenance != PROVENANCE_SILVER)

    def silver_ids(self) -> list[str]:
        return [i for i, e in self._entries.items() if e.provenance == PROVENANCE_SILVER]

    def gold_ids_with_label(self, label: int) -> list[str]:
        """Human-annotated (non-silver) points carrying ``label``."""
        return [
            i
            for i, e in self._entries.items()
            if e.label == label and e.provenance != PROVENANCE_SILVER
        ]

    def subset(self, ids: Iterable[str]) -> "LabeledPool":
        out = LabeledPool()
        for point_id in ids:
            entry = self._entries[point_id]
            out.add(point_id, entry.label, entry.provenance)
        return out


@dataclass(frozen=True)
class AnnotationItem:
    """One point submitted to an oracle backend."""

    point_id: str
    text: str
    gold_label: str
    phase: str
    cluster_id: int | None


class OracleBackend(Protocol):
    name: str

    def query(self, items: Sequence[AnnotationItem], ledger: BudgetLedger) -> list[str]:
        """Answer every item with a label string, charging the ledger."""


class SimulatedGoldBackend:
    """Answers instantly by copying each record's gold label."""

    name = "simulated-gold"

    def query(self, items: Sequence[AnnotationItem], ledger: BudgetLedger) -> list[str]:
        labels = []
        for item in items:
            if item.gold_label == UNLABELED_SENTINEL:
                raise MissingGold(
                    f"point {item.point_id!r} carries no gold label; "
                    "the simulated oracle cannot answer it"
                )
            labels.append(item.gold_label)
        ledger.charge(len(items))
        return labels


_PHASE_PROVENANCE = {
    "ncd": PROVENANCE_NCD,
    "cqba": PROVENANCE_CQBA,
    "gold": PROVENANCE_GOLD,
}


class OracleHandle:
    """Front door for gold annotation: validation, backend query, pool update."""

    def __init__(
        self,
        backend: OracleBackend,
        records_by_id: dict[str, UtteranceRecord],
        vocabulary: ClassVocabulary,
        pool: LabeledPool,
        ledger: BudgetLedger,
    ) -> None:
        self.backend = backend
        self._records = records_by_id
        self.vocabulary = vocabulary
        self.pool = pool
        self.ledger = ledger

    def record(self, point_id: str) -> UtteranceRecord:
        try:
            return self._records[point_id]
        except KeyError:
            raise UnknownPoint(f"point {point_id!r} not in corpus") from None

    def annotate(
        self,
        ids: Sequence[str],
        phase: str,
        cluster_ids: Sequence[int | None] | None = None,
    ) -> list[tuple[str, str]]:
        """Annotate ``ids`` atomically; returns (point id, label) pairs.

        The whole batch is rejected before any label is revealed when it
        exceeds the remaining budget, so callers size batches to ``remaining``.
        """
        if not ids:
            raise ValueError("annotate called with no ids")
        if phase not in _PHASE_PROVENANCE:
            raise ValueError(f"unknown annotation phase {phase!r}")
        if len(set(ids)) != len(ids):
            raise ValueError("annotate called with duplicate ids")
        for point_id in ids:
            if point_id not in self._records:
                raise UnknownPoint(f"point {point_id!r} not in corpus")
            if point_id in self.pool:
                raise AlreadyLabeled(f"point {point_id!r} already labeled")
        if len(ids) > self.ledger.remaining:
            raise BudgetExhausted(
                f"batch of {len(ids)} exceeds remaining budget {self.ledger.remaining}"
            )

        if cluster_ids is None:
            cluster_ids = [None] * len(ids)
        items = [
            AnnotationItem(
                point_id=point_id,
                text=self._records[point_id].text,
                gold_label=self._records[point_id].gold_label,
                phase=phase,
                cluster_id=cluster_id,
            )
            for point_id, cluster_id in zip(ids, cluster_ids)
        ]
        labels = self.backend.query(items, self.ledger)

        provenance = _PHASE_PROVENANCE[phase]
        for point_id, label in zip(ids, labels):
            self.pool.add(point_id, self.vocabulary.ensure(label), provenance)
        self.ledger.record(phase, len(ids))
        return list(zip(ids, labels))


def annotate(
    oracle: OracleHandle,
    ids: Sequence[str],
    phase: str = "gold",
    cluster_ids: Sequence[int | None] | None = None,
) -> list[tuple[str, str]]:
    """Module-level alias for :meth:`OracleHandle.annotate`."""
    return oracle.annotate(ids, phase, cluster_ids)
