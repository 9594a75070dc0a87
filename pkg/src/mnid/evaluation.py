"""Metrics and the run report.

Accuracy / macro-F1, McNemar's test (continuity-corrected), class-discovery
rate, silver-label precision, and the versioned JSON / flat-CSV report that
every pipeline run emits.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np

from .core import PROVENANCE_SILVER, ClassVocabulary, LabeledPool
from .errors import LengthMismatch, MissingGold
from .ingest import Corpus

REPORT_SCHEMA_VERSION = 1

#: chi-square cutoff at p = 0.05 with one degree of freedom
MCNEMAR_CUTOFF = 3.841
MCNEMAR_VARIANT = "continuity-corrected"


def accuracy_macro_f1(
    pred: Sequence[int], gold: Sequence[int]
) -> tuple[float, float]:
    """Accuracy and macro-F1 averaged over the classes present in ``gold``.

    A class with no true positives contributes an F1 of zero.
    """
    if len(pred) != len(gold):
        raise LengthMismatch(f"{len(pred)} predictions vs {len(gold)} gold labels")
    if not gold:
        raise LengthMismatch("empty inputs")
    pred_arr = np.asarray(pred)
    gold_arr = np.asarray(gold)
    accuracy = float(np.mean(pred_arr == gold_arr))
    f1s = []
    for cls in sorted(set(gold_arr.tolist())):
        tp = int(np.sum((pred_arr == cls) & (gold_arr == cls)))
        fp = int(np.sum((pred_arr == cls) & (gold_arr != cls)))
        fn = int(np.sum((pred_arr != cls) & (gold_arr == cls)))
        f1s.append(0.0 if tp == 0 else 2 * tp / (2 * tp + fp + fn))
    return accuracy, float(np.mean(f1s))


def mcnemar(
    pred_a: Sequence[int], pred_b: Sequence[int], gold: Sequence[int]
) -> tuple[float, bool]:
    """Continuity-corrected McNemar chi-square on paired predictions."""
    if not (len(pred_a) == len(pred_b) == len(gold)):
        raise LengthMismatch("pred_a, pred_b and gold must have equal lengths")
    a = np.asarray(pred_a) == np.asarray(gold)
    b = np.asarray(pred_b) == np.asarray(gold)
    only_a = int(np.sum(a & ~b))
    only_b = int(np.sum(~a & b))
    if only_a + only_b == 0:
        return 0.0, False
    chi_square = max(abs(only_a - only_b) - 1, 0) ** 2 / (only_a + only_b)
    return float(chi_square), chi_square > MCNEMAR_CUTOFF


def discovery_rate(
    pool: LabeledPool, vocab: ClassVocabulary
) -> tuple[int, int, float]:
    """Unknown-at-start classes that received at least one non-silver label."""
    unknown = vocab.unknown_at_start()
    found = {
        entry.label
        for _, entry in pool.items()
        if entry.provenance != PROVENANCE_SILVER and entry.label in unknown
    }
    total = len(unknown)
    return len(found), total, (len(found) / total if total else 1.0)


@dataclass
class SilverSummary:
    count: int
    precision: float
    mean_points_per_class: float


def silver_precision(pool: LabeledPool, corpus: Corpus) -> SilverSummary | None:
    """Fraction of silver labels matching gold; None when no silver exists."""
    silver = [(i, e) for i, e in pool.items() if e.provenance == PROVENANCE_SILVER]
    if not silver:
        return None
    correct = 0
    for point_id, entry in silver:
        record = corpus.by_id[point_id]
        if not record.has_gold():
            raise MissingGold(f"silver point {point_id!r} has no gold label")
        if corpus.vocabulary.index(record.gold_label) == entry.label:
            correct += 1
    classes = {entry.label for _, entry in silver}
    return SilverSummary(
        count=len(silver),
        precision=correct / len(silver),
        mean_points_per_class=len(silver) / len(classes),
    )


@dataclass
class PipelineReport:
    """Everything a run (pipeline or baseline) reports, JSON-serializable."""

    config: dict[str, Any]
    budget: dict[str, Any]
    discovery: dict[str, Any]
    ood: dict[str, Any] | None = None
    ncd: dict[str, Any] | None = None
    cluster_quality: dict[str, Any] | None = None
    ppas: dict[str, Any] | None = None
    metrics: dict[str, Any] | None = None
    silver: dict[str, Any] | None = None
    gold_annotations_per_class: dict[str, int] = field(default_factory=dict)
    baseline: str | None = None
    baseline_detail: dict[str, Any] | None = None
    runtime: dict[str, Any] = field(default_factory=dict)
    schema_version: int = REPORT_SCHEMA_VERSION

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def comparable_dict(self) -> dict[str, Any]:
        """Report content minus operational data (timings, oracle backend)."""
        out = self.to_dict()
        out.pop("runtime")
        return out


def report_json(report: PipelineReport) -> str:
    """Canonical serialization: sorted keys, two-space indent, newline-terminated."""
    return json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"


def report_csv_rows(report: PipelineReport) -> list[tuple[str, Any]]:
    """Flat (metric, value) rows for plotting; scalar fields only."""
    flat: list[tuple[str, Any]] = []

    def walk(prefix: str, value: Any) -> None:
        if isinstance(value, dict):
            for key in sorted(value):
                walk(f"{prefix}.{key}" if prefix else str(key), value[key])
        elif isinstance(value, list):
            flat.append((f"{prefix}.length", len(value)))
        else:
            flat.append((prefix, value))

    data = report.to_dict()
    data.pop("runtime")
    data.pop("config")
    walk("", data)
    return flat


REPORT_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": [
        "schema_version",
        "config",
        "budget",
        "discovery",
        "gold_annotations_per_class",
        "runtime",
    ],
    "properties": {
        "schema_version": {"const": REPORT_SCHEMA_VERSION},
        "config": {"type": "object"},
        "baseline": {"type": ["string", "null"]},
        "budget": {
            "type": "object",
            "required": ["total", "initial_spent", "spent", "remaining", "trace"],
            "properties": {
                "total": {"type": "integer", "minimum": 0},
                "initial_spent": {"type": "integer", "minimum": 0},
                "spent": {"type": "integer", "minimum": 0},
                "remaining": {"type": "integer", "minimum": 0},
                "trace": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["phase", "count", "spent_after"],
                    },
                },
            },
        },
        "discovery": {
            "type": "object",
            "required": ["found", "total_unknown", "rate"],
        },
        "ood": {"type": ["object", "null"]},
        "ncd": {"type": ["object", "null"]},
        "cluster_quality": {"type": ["object", "null"]},
        "ppas": {"type": ["object", "null"]},
        "metrics": {"type": ["object", "null"]},
        "silver": {"type": ["object", "null"]},
        "gold_annotations_per_class": {"type": "object"},
        "baseline_detail": {"type": ["object", "null"]},
        "runtime": {"type": "object"},
    },
}
