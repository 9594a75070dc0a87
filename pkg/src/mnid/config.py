"""Run configuration: one JSON document drives a whole pipeline run."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from .classifier import TrainConfig
from .ood import OodConfig

CLUSTERERS = ("kmeans", "agglomerative")
BASELINES = ("none", "gold_few", "random_few")
ORACLE_BACKENDS = ("simulated-gold", "live-queue")


@dataclass
class RunConfig:
    seed: int = 0
    kappa: int = 10
    x: int = 2  # annotations per cluster during discovery
    p: int = 3  # quality-probe size per cluster
    q: int = 2  # extra annotations per bad cluster
    th: float = 0.5  # confidence gate for silver
    tau: float = 0.8  # cosine-similarity gate for silver
    variant: int = 9
    ood: OodConfig = field(default_factory=OodConfig)
    clusterer: str = "kmeans"
    linkage: str = "average"
    classifier: TrainConfig = field(default_factory=TrainConfig)
    normalize_embeddings: bool = True
    baseline: str = "none"
    # Budget is kappa * (distinct gold classes) unless overridden; the
    # override exists for live corpora whose class count is unknown upfront.
    budget_override: int | None = None
    oracle_backend: str = "simulated-gold"

    def validate(self) -> None:
        if self.kappa < 1:
            raise ValueError("kappa must be >= 1")
        if self.x < 2:
            raise ValueError("x must be >= 2 (new-class probing needs two points)")
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.q < 0:
            raise ValueError("q must be >= 0")
        if not (0.0 <= self.th <= 1.0):
            raise ValueError("th must lie in [0, 1]")
        if not (-1.0 <= self.tau <= 1.0):
            raise ValueError("tau must lie in [-1, 1]")
        if self.variant not in range(1, 10):
            raise ValueError("variant must lie in 1..9")
        if self.clusterer not in CLUSTERERS:
            raise ValueError(f"clusterer must be one of {CLUSTERERS}")
        if self.baseline not in BASELINES:
            raise ValueError(f"baseline must be one of {BASELINES}")
        if self.oracle_backend not in ORACLE_BACKENDS:
            raise ValueError(f"oracle_backend must be one of {ORACLE_BACKENDS}")
        if self.budget_override is not None and self.budget_override < 0:
            raise ValueError("budget_override must be non-negative")
        self.ood.validate()
        self.classifier.validate()

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "RunConfig":
        data = dict(obj)
        ood = OodConfig(**data.pop("ood", {}))
        clf = TrainConfig(**data.pop("classifier", {}))
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(ood=ood, classifier=clf, **data)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as handle:
            return cls.from_dict(json.load(handle))

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def echo_dict(self) -> dict[str, Any]:
        """Config echo for reports: the experiment, not the oracle transport."""
        out = self.to_dict()
        out.pop("oracle_backend")
        return out
