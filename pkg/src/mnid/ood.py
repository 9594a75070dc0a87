"""Out-of-domain detection over fixed embeddings.

Three detectors trained on the initially labeled points: maximum softmax
probability, one-vs-rest sigmoids with per-class score floors, and
nearest-prototype distance thresholding. Each flags the pool points that do
not look like any initially known class; those flagged points feed the
novel-class discovery loop.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .classifier import TrainConfig, predict, train
from .core import LabeledPool
from .errors import DegenerateLabels, MissingGold, UnknownMethod
from .evaluation import accuracy_macro_f1
from .ingest import Corpus, EmbeddingMatrix

OOD_METHODS = ("msp", "doc", "proto")


@dataclass
class OodConfig:
    # Prototype distance is the default detector: it wins across datasets and
    # is what feeds the discovery pipeline; msp/doc are the alternatives.
    method: str = "proto"
    msp_threshold: float = 0.5
    proto_margin: float = 1.0

    def validate(self) -> None:
        if self.method not in OOD_METHODS:
            raise UnknownMethod(f"unknown OOD method {self.method!r}")
        if self.method == "msp" and not (0.0 < self.msp_threshold < 1.0):
            raise ValueError("msp_threshold must lie in (0, 1)")
        if self.proto_margin <= 0:
            raise ValueError("proto_margin must be positive")


@dataclass
class OodVerdict:
    """Per-point score and flag; ``higher_is_ind`` fixes the decision direction."""

    method: str
    threshold: float
    higher_is_ind: bool
    scores: dict[str, float] = field(default_factory=dict)
    is_ood: dict[str, bool] = field(default_factory=dict)

    def ood_ids(self) -> list[str]:
        return [i for i, flagged in self.is_ood.items() if flagged]


@dataclass
class OodSummary:
    accuracy: float
    macro_f1: float
    tp: int  # OOD flagged OOD
    fp: int  # IND flagged OOD
    fn: int  # OOD kept IND
    tn: int  # IND kept IND


def _decide(verdict: OodVerdict, point_id: str, score: float) -> None:
    verdict.scores[point_id] = score
    if verdict.higher_is_ind:
        # Strict inequality: a score exactly at the threshold stays in-domain.
        verdict.is_ood[point_id] = score < verdict.threshold
    else:
        verdict.is_ood[point_id] = score > verdict.threshold


def _msp(
    init: LabeledPool, pool_ids: list[str], x: EmbeddingMatrix, cfg: OodConfig,
    train_cfg: TrainConfig,
) -> OodVerdict:
    model = train(init, x, train_cfg)
    table = predict(model, pool_ids, x)
    verdict = OodVerdict(method="msp", threshold=cfg.msp_threshold, higher_is_ind=True)
    for point_id in pool_ids:
        _decide(verdict, point_id, table.confidence(point_id))
    return verdict


def _doc(
    init: LabeledPool, pool_ids: list[str], x: EmbeddingMatrix, cfg: OodConfig,
    train_cfg: TrainConfig,
) -> OodVerdict:
    """One-vs-rest sigmoid scores with per-class floor max(0.5, mu - 3*sigma).

    A point is out-of-domain when every class score falls below that class's
    floor; the stored score is the largest per-class clearance, so the shared
    decision threshold is zero.
    """
    init_ids = sorted(init.ids())
    classes = sorted({init.get(i).label for i in init_ids})
    if len(classes) < 2:
        raise DegenerateLabels("doc needs >= 2 known classes")
    clearances = np.full((len(pool_ids), len(classes)), -np.inf)
    for col, label in enumerate(classes):
        binary = LabeledPool()
        for point_id in init_ids:
            binary.add(point_id, 1 if init.get(point_id).label == label else 0, "initial")
        model = train(binary, x, train_cfg)
        positive = model.classes.index(1)
        in_class = [i for i in init_ids if init.get(i).label == label]
        own_table = predict(model, in_class, x)
        own = np.array(
            [own_table.entries[i].probabilities[positive] for i in in_class]
        )
        floor = max(0.5, float(own.mean() - 3.0 * own.std()))
        pool_scores = predict(model, pool_ids, x)
        for row, point_id in enumerate(pool_ids):
            clearances[row, col] = (
                float(pool_scores.entries[point_id].probabilities[positive]) - floor
            )
    verdict = OodVerdict(method="doc", threshold=0.0, higher_is_ind=True)
    for row, point_id in enumerate(pool_ids):
        _decide(verdict, point_id, float(clearances[row].max()))
    return verdict


def _proto(
    init: LabeledPool, pool_ids: list[str], x: EmbeddingMatrix, cfg: OodConfig
) -> OodVerdict:
    init_ids = sorted(init.ids())
    classes = sorted({init.get(i).label for i in init_ids})
    if len(classes) < 2:
        raise DegenerateLabels("proto needs >= 2 known classes")
    prototypes = {}
    for label in classes:
        rows = x.rows([i for i in init_ids if init.get(i).label == label])
        prototypes[label] = rows.astype(np.float64).mean(axis=0)
    max_intra = 0.0
    for point_id in init_ids:
        delta = x.row(point_id).astype(np.float64) - prototypes[init.get(point_id).label]
        max_intra = max(max_intra, float(np.linalg.norm(delta)))
    margin = cfg.proto_margin * max_intra
    proto_matrix = np.stack([prototypes[label] for label in classes])
    verdict = OodVerdict(method="proto", threshold=margin, higher_is_ind=False)
    distances = np.linalg.norm(
        x.rows(pool_ids).astype(np.float64)[:, None, :] - proto_matrix[None, :, :],
        axis=2,
    )
    for row, point_id in enumerate(pool_ids):
        _decide(verdict, point_id, float(distances[row].min()))
    return verdict


def oodd(
    init: LabeledPool,
    pool_ids: list[str],
    x: EmbeddingMatrix,
    cfg: OodConfig,
    train_cfg: TrainConfig | None = None,
) -> OodVerdict:
    """Train the configured detector on the initial pool and flag ``pool_ids``."""
    cfg.validate()
    train_cfg = train_cfg or TrainConfig()
    if len({init.get(i).label for i in init.ids()}) < 2:
        raise DegenerateLabels("OOD detection needs >= 2 known classes")
    if cfg.method == "msp":
        return _msp(init, pool_ids, x, cfg, train_cfg)
    if cfg.method == "doc":
        return _doc(init, pool_ids, x, cfg, train_cfg)
    return _proto(init, pool_ids, x, cfg)


def ood_confusion(verdict: OodVerdict, corpus: Corpus) -> OodSummary:
    """Score the verdict against gold class membership (simulation mode only)."""
    gold = []
    flagged = []
    known = corpus.vocabulary.known_at_start
    for point_id, is_ood in verdict.is_ood.items():
        record = corpus.by_id[point_id]
        if not record.has_gold():
            raise MissingGold(f"point {point_id!r} has no gold label")
        gold.append(0 if corpus.vocabulary.index(record.gold_label) in known else 1)
        flagged.append(1 if is_ood else 0)
    accuracy, macro_f1 = accuracy_macro_f1(flagged, gold)
    gold_arr = np.array(gold)
    pred_arr = np.array(flagged)
    return OodSummary(
        accuracy=accuracy,
        macro_f1=macro_f1,
        tp=int(np.sum((gold_arr == 1) & (pred_arr == 1))),
        fp=int(np.sum((gold_arr == 0) & (pred_arr == 1))),
        fn=int(np.sum((gold_arr == 1) & (pred_arr == 0))),
        tn=int(np.sum((gold_arr == 0) & (pred_arr == 0))),
    )
