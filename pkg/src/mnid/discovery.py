"""The budgeted discovery pipeline.

Stages, in order: cluster the out-of-domain points with a doubling cluster
count and probe each cluster to find new classes; probe every stored cluster
for label purity (good vs bad); train the classifier and spend the rest of
the budget on silver (free, gated) and gold (charged, least-confidence)
labels; train once more and evaluate. Two baseline annotators (per-class
sampling and uniform sampling) reuse the same budget machinery.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .classifier import ConfidenceTable, predict, train
from .clustering import ClusterSet, agglomerative, kmeans
from .config import RunConfig
from .core import (
    PROVENANCE_INITIAL,
    PROVENANCE_SILVER,
    BudgetLedger,
    ClassVocabulary,
    LabeledPool,
    OracleBackend,
    OracleHandle,
    SimulatedGoldBackend,
)
from .errors import (
    BudgetExhausted,
    EmptyOodSet,
    MissingGold,
    SampleTooLarge,
    UnknownMethod,
)
from .evaluation import (
    MCNEMAR_VARIANT,
    PipelineReport,
    accuracy_macro_f1,
    discovery_rate,
    silver_precision,
)
from .ingest import Corpus, EmbeddingMatrix, normalized_copy
from .ood import ood_confusion, oodd
from .randomness import (
    STREAM_GOLD_FEW,
    STREAM_NCD_ROUND,
    STREAM_RANDOM_FEW,
    generator,
    subseed,
)

SILVER_NONE = "none"
SILVER_GOOD_ALL = "good-clusters-all"
SILVER_GOOD_HIGH_CONF = "good-clusters-high-conf"

GOLD_NONE = "none"
GOLD_ANY_BAD = "any-point-bad"
GOLD_LOW_CONF_ANY = "low-conf-any"
GOLD_LOW_CONF_BAD = "low-conf-bad"
GOLD_LOW_CONF_BAD_FALLBACK = "low-conf-bad-with-fallback"


@dataclass(frozen=True)
class StrategyVariant:
    """One of the nine silver/gold strategy combinations."""

    number: int
    silver_scope: str
    gold_scope: str

    @classmethod
    def from_number(cls, number: int) -> "StrategyVariant":
        try:
            silver, gold = _VARIANT_TABLE[number]
        except KeyError:
            raise UnknownMethod(f"variant must lie in 1..9, got {number}") from None
        return cls(number=number, silver_scope=silver, gold_scope=gold)


# The all-points silver rows drop the confidence gate (threshold zero) but
# keep the cosine gate; the bad-cluster gold rows marked "fallback" switch to
# good clusters when no bad cluster exists, while variant 6 simply does
# nothing in that case.
_VARIANT_TABLE: dict[int, tuple[str, str]] = {
    1: (SILVER_GOOD_ALL, GOLD_NONE),
    2: (SILVER_GOOD_ALL, GOLD_ANY_BAD),
    3: (SILVER_NONE, GOLD_LOW_CONF_ANY),
    4: (SILVER_GOOD_HIGH_CONF, GOLD_NONE),
    5: (SILVER_GOOD_HIGH_CONF, GOLD_LOW_CONF_ANY),
    6: (SILVER_GOOD_ALL, GOLD_LOW_CONF_BAD),
    7: (SILVER_NONE, GOLD_LOW_CONF_BAD_FALLBACK),
    8: (SILVER_GOOD_ALL, GOLD_LOW_CONF_BAD_FALLBACK),
    9: (SILVER_GOOD_HIGH_CONF, GOLD_LOW_CONF_BAD_FALLBACK),
}


@dataclass
class NcdRound:
    k: int
    newly_seen: int
    charged: int


@dataclass
class NcdOutcome:
    n_new: int
    rounds: list[NcdRound]
    clusters: ClusterSet | None
    exit_reason: str  # converged | budget | k-exceeds-points

    def to_dict(self) -> dict:
        return {
            "n_new": self.n_new,
            "rounds": [vars(r) for r in self.rounds],
            "stored_clusters": self.clusters.k if self.clusters else None,
            "exit_reason": self.exit_reason,
        }


def ncd(
    os_ids: list[str],
    oracle: OracleHandle,
    points_per_cluster: int,
    embeddings: EmbeddingMatrix,
    ledger: BudgetLedger,
    seed: int,
    clusterer: str = "kmeans",
    linkage: str = "average",
) -> NcdOutcome:
    """Novel-class detection by doubling the cluster count.

    Starting at one cluster, each round clusters the out-of-domain set,
    annotates up to ``points_per_cluster`` unlabeled points nearest each
    centroid, and counts the classes never seen before. The loop continues
    while the discovered count stays at or above half the executed cluster
    count; it also stops early when the next round could not be paid for in
    the worst case, or when the cluster count would exceed the point count.
    The stored cluster set is the last one actually clustered.
    """
    if not os_ids:
        raise EmptyOodSet("no out-of-domain points to cluster")
    if points_per_cluster < 2:
        raise ValueError("points_per_cluster must be >= 2")
    seen = oracle.pool.labels_present()
    k = 1
    n_new = 0
    rounds: list[NcdRound] = []
    clusters: ClusterSet | None = None
    exit_reason = "converged"
    round_index = 0
    while n_new >= k // 2:
        if k > len(os_ids):
            exit_reason = "k-exceeds-points"
            break
        if points_per_cluster * k > ledger.remaining:
            exit_reason = "budget"
            break
        if clusterer == "kmeans":
            cl = kmeans(
                os_ids, embeddings, k, subseed(seed, STREAM_NCD_ROUND, round_index)
            )
        elif clusterer == "agglomerative":
            cl = agglomerative(os_ids, embeddings, k, linkage)
        else:
            raise UnknownMethod(f"unknown clusterer {clusterer!r}")
        batch_ids: list[str] = []
        batch_clusters: list[int] = []
        for j in range(cl.k):
            unlabeled = [
                i for i in cl.members_by_distance(j, embeddings) if i not in oracle.pool
            ]
            take = unlabeled[:points_per_cluster]
            batch_ids.extend(take)
            batch_clusters.extend([j] * len(take))
        newly = 0
        if batch_ids:
            results = oracle.annotate(batch_ids, phase="ncd", cluster_ids=batch_clusters)
            labels = {oracle.vocabulary.index(label) for _, label in results}
            newly = len(labels - seen)
            seen |= labels
        rounds.append(NcdRound(k=k, newly_seen=newly, charged=len(batch_ids)))
        n_new += newly
        clusters = cl
        k *= 2
        round_index += 1
    return NcdOutcome(n_new=n_new, rounds=rounds, clusters=clusters, exit_reason=exit_reason)


@dataclass
class ClusterVerdict:
    verdict: str  # good | bad
    label: int | None  # the unanimous class, for good clusters
    probed: bool  # False when the probe could not be afforded
    probe_ids: list[str] = field(default_factory=list)


@dataclass
class ClusterQuality:
    verdicts: list[ClusterVerdict]

    def good_indices(self) -> list[int]:
        return [j for j, v in enumerate(self.verdicts) if v.verdict == "good"]

    def bad_indices(self) -> list[int]:
        return [j for j, v in enumerate(self.verdicts) if v.verdict == "bad"]

    def to_dict(self) -> dict:
        good = len(self.good_indices())
        total = len(self.verdicts)
        return {
            "clusters": total,
            "good": good,
            "bad": total - good,
            "good_fraction": good / total if total else 0.0,
            "bad_fraction": (total - good) / total if total else 0.0,
            "unprobed": sum(1 for v in self.verdicts if not v.probed),
        }


def _ordered_members(
    clusters: ClusterSet, j: int, embeddings: EmbeddingMatrix, farthest: bool = False
) -> list[str]:
    ids = clusters.member_ids[j]
    d = np.linalg.norm(
        embeddings.rows(ids).astype(np.float64) - clusters.centroids[j], axis=1
    )
    if farthest:
        return [ids[i] for i in sorted(range(len(ids)), key=lambda i: (-d[i], ids[i]))]
    return [ids[i] for i in sorted(range(len(ids)), key=lambda i: (d[i], ids[i]))]


def cqba(
    oracle: OracleHandle,
    clusters: ClusterSet,
    p: int,
    q: int,
    ledger: BudgetLedger,
    embeddings: EmbeddingMatrix,
) -> ClusterQuality:
    """Cluster-quality probing: unanimous p-point probes split good from bad.

    Annotations already inside a cluster count toward its probe, so only the
    shortfall is charged. A cluster whose top-up cannot be afforded is marked
    bad without spending; each bad cluster then receives up to ``q`` extra
    annotations on its fringe (farthest from the centroid) while budget lasts.
    """
    if p < 1 or q < 0:
        raise ValueError("need p >= 1 and q >= 0")
    verdicts: list[ClusterVerdict] = []
    for j in range(clusters.k):
        members = clusters.member_ids[j]
        annotated = [
            i
            for i in members
            if i in oracle.pool
            and oracle.pool.get(i).provenance != PROVENANCE_SILVER
        ]
        need = max(0, min(p, len(members)) - len(annotated))
        if need > ledger.remaining:
            verdicts.append(
                ClusterVerdict(verdict="bad", label=None, probed=False,
                               probe_ids=sorted(annotated))
            )
            continue
        if need:
            candidates = [
                i for i in _ordered_members(clusters, j, embeddings)
                if i not in oracle.pool
            ][:need]
            oracle.annotate(candidates, phase="cqba", cluster_ids=[j] * len(candidates))
            annotated.extend(candidates)
        labels = {oracle.pool.get(i).label for i in annotated}
        if len(labels) == 1:
            verdicts.append(
                ClusterVerdict(verdict="good", label=labels.pop(), probed=True,
                               probe_ids=sorted(annotated))
            )
        else:
            verdicts.append(
                ClusterVerdict(verdict="bad", label=None, probed=True,
                               probe_ids=sorted(annotated))
            )
    quality = ClusterQuality(verdicts=verdicts)
    if q > 0:
        for j in quality.bad_indices():
            unlabeled = [
                i for i in _ordered_members(clusters, j, embeddings, farthest=True)
                if i not in oracle.pool
            ]
            take = min(q, len(unlabeled), ledger.remaining)
            if take:
                oracle.annotate(unlabeled[:take], phase="cqba", cluster_ids=[j] * take)
    return quality


@dataclass
class PpasOutcome:
    silver_ids: list[str]
    gold_ids: list[str]

    def to_dict(self) -> dict:
        return {"silver_added": len(self.silver_ids), "gold_added": len(self.gold_ids)}


def _mean_cosine(point: np.ndarray, others: np.ndarray) -> float:
    point_norm = float(np.linalg.norm(point))
    other_norms = np.linalg.norm(others, axis=1)
    if point_norm == 0.0 or np.any(other_norms == 0.0):
        return 0.0
    return float(np.mean(others @ point / (other_norms * point_norm)))


def ppas(
    oracle: OracleHandle,
    all_cs: ConfidenceTable,
    quality: ClusterQuality,
    clusters: ClusterSet,
    embeddings: EmbeddingMatrix,
    ledger: BudgetLedger,
    th: float,
    tau: float,
    variant: StrategyVariant,
) -> PpasOutcome:
    """Post-processing annotation: free silver labels, then charged gold labels.

    Silver: a point in a good cluster receives the cluster's class when its
    confidence clears the variant's gate and its mean cosine similarity to the
    human-annotated points of that class reaches ``tau``; never charged.
    Gold: clusters in the variant's scope are visited round-robin (ascending
    index, skipping exhausted ones) and each visit annotates the least-confident
    remaining point, until the budget or the candidates run out.
    """
    pool = oracle.pool
    silver_ids: list[str] = []
    if variant.silver_scope != SILVER_NONE:
        gate = 0.0 if variant.silver_scope == SILVER_GOOD_ALL else th
        for j in quality.good_indices():
            label = quality.verdicts[j].label
            assert label is not None
            anchor_ids = pool.gold_ids_with_label(label)
            if not anchor_ids:
                continue
            anchors = embeddings.rows(anchor_ids).astype(np.float64)
            for point_id in sorted(clusters.member_ids[j]):
                if point_id in pool:
                    continue
                if all_cs.confidence(point_id) < gate:
                    continue
                point = embeddings.row(point_id).astype(np.float64)
                if _mean_cosine(point, anchors) >= tau:
                    pool.add(point_id, label, PROVENANCE_SILVER)
                    silver_ids.append(point_id)

    gold_ids: list[str] = []
    scope = variant.gold_scope
    if scope != GOLD_NONE:
        if scope == GOLD_LOW_CONF_ANY:
            visit = list(range(clusters.k))
        elif scope in (GOLD_ANY_BAD, GOLD_LOW_CONF_BAD):
            visit = quality.bad_indices()
        else:  # bad clusters, falling back to good when none exist
            visit = quality.bad_indices() or quality.good_indices()
        by_confidence = scope != GOLD_ANY_BAD
        while ledger.remaining > 0:
            progressed = False
            for j in visit:
                if ledger.remaining == 0:
                    break
                eligible = [i for i in clusters.member_ids[j] if i not in pool]
                if not eligible:
                    continue
                if by_confidence:
                    pick = min(eligible, key=lambda i: (all_cs.confidence(i), i))
                else:
                    pick = min(eligible)
                oracle.annotate([pick], phase="gold", cluster_ids=[j])
                gold_ids.append(pick)
                progressed = True
            if not progressed:
                break
    return PpasOutcome(silver_ids=silver_ids, gold_ids=gold_ids)


def gold_few(
    pool_ids: list[str],
    oracle: OracleHandle,
    per_class: int,
    new_classes: list[int],
    seed: int,
) -> tuple[LabeledPool, dict[str, int]]:
    """Baseline: annotate ``per_class`` random points of every new class.

    Requires gold labels (only a simulated setting can group the pool by
    class). Classes with too few points are annotated in full and recorded as
    shortfalls.
    """
    by_class: dict[int, list[str]] = {c: [] for c in new_classes}
    for point_id in sorted(pool_ids):
        record = oracle.record(point_id)
        if not record.has_gold():
            raise MissingGold(f"point {point_id!r} has no gold label")
        label = oracle.vocabulary.index(record.gold_label)
        if label in by_class:
            by_class[label].append(point_id)
    shortfalls: dict[str, int] = {}
    for label in sorted(by_class):
        candidates = by_class[label]
        rng = generator(seed, STREAM_GOLD_FEW, label)
        order = [candidates[i] for i in rng.permutation(len(candidates))]
        take = min(per_class, len(candidates), oracle.ledger.remaining)
        if len(candidates) < per_class:
            shortfalls[oracle.vocabulary.label(label)] = len(candidates)
        if take:
            oracle.annotate(order[:take], phase="gold")
    return oracle.pool, shortfalls


def random_few(
    pool_ids: list[str], oracle: OracleHandle, n: int, seed: int
) -> LabeledPool:
    """Baseline: annotate a uniform sample (without replacement) of the pool."""
    if n > len(pool_ids):
        raise SampleTooLarge(f"sample of {n} from pool of {len(pool_ids)}")
    if n == 0:
        return oracle.pool
    ordered = sorted(pool_ids)
    rng = generator(seed, STREAM_RANDOM_FEW)
    picks = [ordered[i] for i in rng.permutation(len(ordered))[:n]]
    oracle.annotate(picks, phase="gold")
    return oracle.pool


def run_mnid(
    corpus: Corpus,
    embeddings: EmbeddingMatrix,
    cfg: RunConfig,
    backend: OracleBackend | None = None,
    observer: Callable[..., None] | None = None,
    artifacts: dict | None = None,
) -> PipelineReport:
    """Execute the full pipeline (or a configured baseline) and report.

    Stage flow: out-of-domain detection, novel-class detection, cluster
    quality probing (budget permitting), classifier training for confidence
    scores, post-processing annotation (budget permitting), final training,
    evaluation on the test split. Budget exhaustion ends stages early but is
    never an error; every stage outcome lands in the report.

    When ``artifacts`` is a dict, the final model, labeled pool and raw test
    predictions are stored in it (for paired significance tests and debugging).
    """
    cfg.validate()
    variant = StrategyVariant.from_number(cfg.variant)
    notify = observer or (lambda stage, info=None: None)
    timings: dict[str, float] = {}

    if cfg.normalize_embeddings:
        embeddings = normalized_copy(embeddings)

    vocab = _copy_vocabulary(corpus)
    init_ids = corpus.split_ids("init")
    pool_ids = corpus.split_ids("pool")
    test_ids = corpus.split_ids("test")
    total_budget = (
        cfg.budget_override
        if cfg.budget_override is not None
        else cfg.kappa * len(vocab)
    )
    if total_budget < len(init_ids):
        raise BudgetExhausted(
            f"budget {total_budget} cannot cover the {len(init_ids)} initial labels"
        )

    ledger = BudgetLedger(total=total_budget, spent=len(init_ids))
    ledger.record("init", len(init_ids))
    notify("start", {"budget_total": ledger.total, "budget_spent": ledger.spent})
    pool = LabeledPool()
    for point_id in init_ids:
        pool.add(point_id, vocab.index(corpus.by_id[point_id].gold_label), PROVENANCE_INITIAL)
    oracle = OracleHandle(
        backend or SimulatedGoldBackend(), corpus.by_id, vocab, pool, ledger
    )

    ood_section = None
    ncd_section = None
    quality_section = None
    ppas_section = None
    baseline_detail = None

    if cfg.baseline != "none":
        started = time.perf_counter()
        notify("baseline")
        if cfg.baseline == "gold_few":
            unknown = sorted(vocab.unknown_at_start())
            _, shortfalls = gold_few(pool_ids, oracle, cfg.kappa, unknown, cfg.seed)
            baseline_detail = {"per_class": cfg.kappa, "shortfalls": shortfalls}
        else:
            sample = min(ledger.remaining, len(pool_ids))
            random_few(pool_ids, oracle, sample, cfg.seed)
            baseline_detail = {"sample_size": sample}
        timings["baseline"] = time.perf_counter() - started
    else:
        started = time.perf_counter()
        notify("oodd")
        verdict = oodd(pool, pool_ids, embeddings, cfg.ood, cfg.classifier)
        os_ids = verdict.ood_ids()
        ood_section = {
            "method": verdict.method,
            "flagged": len(os_ids),
            "pool_size": len(pool_ids),
            "confusion": None,
        }
        if corpus.has_gold(pool_ids):
            summary = ood_confusion(verdict, corpus)
            ood_section["confusion"] = vars(summary)
        timings["oodd"] = time.perf_counter() - started

        quality = None
        clusters = None
        if os_ids:
            started = time.perf_counter()
            notify("ncd")
            outcome = ncd(
                os_ids,
                oracle,
                cfg.x,
                embeddings,
                ledger,
                cfg.seed,
                clusterer=cfg.clusterer,
                linkage=cfg.linkage,
            )
            ncd_section = outcome.to_dict()
            clusters = outcome.clusters
            timings["ncd"] = time.perf_counter() - started
            if clusters is not None:
                notify(
                    "ncd-complete",
                    {
                        "n_new": outcome.n_new,
                        "clusters": [
                            {"index": j, "size": len(m), "verdict": None}
                            for j, m in enumerate(clusters.member_ids)
                        ],
                    },
                )

            if clusters is not None and ledger.remaining > 0:
                started = time.perf_counter()
                notify("cqba")
                quality = cqba(oracle, clusters, cfg.p, cfg.q, ledger, embeddings)
                quality_section = quality.to_dict()
                timings["cqba"] = time.perf_counter() - started
                notify(
                    "cqba-complete",
                    {
                        "clusters": [
                            {"index": j, "size": len(m), "verdict": quality.verdicts[j].verdict}
                            for j, m in enumerate(clusters.member_ids)
                        ]
                    },
                )
        else:
            ncd_section = {
                "n_new": 0,
                "rounds": [],
                "stored_clusters": None,
                "exit_reason": "empty-os",
            }

        if quality is not None and ledger.remaining > 0:
            started = time.perf_counter()
            notify("confidence")
            model = train(pool, embeddings, cfg.classifier)
            targets = sorted(
                i for members in clusters.member_ids for i in members if i not in pool
            )
            all_cs = predict(model, targets, embeddings)
            if artifacts is not None:
                artifacts["confidence"] = all_cs
            timings["confidence"] = time.perf_counter() - started

            started = time.perf_counter()
            notify("ppas")
            outcome = ppas(
                oracle, all_cs, quality, clusters, embeddings, ledger,
                cfg.th, cfg.tau, variant,
            )
            ppas_section = outcome.to_dict()
            timings["ppas"] = time.perf_counter() - started

    started = time.perf_counter()
    notify("final-training")
    final_model = train(pool, embeddings, cfg.classifier)
    timings["final_training"] = time.perf_counter() - started

    metrics_section = None
    if artifacts is not None:
        artifacts["final_model"] = final_model
        artifacts["pool"] = pool
        artifacts["vocabulary"] = vocab
    if test_ids and corpus.has_gold(test_ids):
        started = time.perf_counter()
        notify("evaluation")
        table = predict(final_model, test_ids, embeddings)
        pred = [table.predicted(i) for i in test_ids]
        gold = [vocab.index(corpus.by_id[i].gold_label) for i in test_ids]
        accuracy, macro_f1 = accuracy_macro_f1(pred, gold)
        metrics_section = {
            "test_size": len(test_ids),
            "accuracy": accuracy,
            "macro_f1": macro_f1,
        }
        if artifacts is not None:
            artifacts["test_ids"] = list(test_ids)
            artifacts["test_predictions"] = pred
            artifacts["test_gold"] = gold
        timings["evaluation"] = time.perf_counter() - started

    found, total_unknown, rate = discovery_rate(pool, vocab)
    silver_section = None
    silver_ids = pool.silver_ids()
    if silver_ids:
        silver_section = {"count": len(silver_ids), "precision": None,
                          "mean_points_per_class": None}
        if corpus.has_gold(silver_ids):
            summary = silver_precision(pool, corpus)
            silver_section = vars(summary)

    per_class: dict[str, int] = {}
    for point_id, entry in pool.items():
        if entry.provenance in ("ncd", "cqba", "gold"):
            name = vocab.label(entry.label)
            per_class[name] = per_class.get(name, 0) + 1

    notify("done")
    return PipelineReport(
        config=cfg.echo_dict(),
        budget={
            "total": ledger.total,
            "initial_spent": len(init_ids),
            "spent": ledger.spent,
            "remaining": ledger.remaining,
            "trace": [vars(e) for e in ledger.trace],
        },
        discovery={"found": found, "total_unknown": total_unknown, "rate": rate},
        ood=ood_section,
        ncd=ncd_section,
        cluster_quality=quality_section,
        ppas=ppas_section,
        metrics=metrics_section,
        silver=silver_section,
        gold_annotations_per_class=dict(sorted(per_class.items())),
        baseline=None if cfg.baseline == "none" else cfg.baseline,
        baseline_detail=baseline_detail,
        runtime={
            "oracle_backend": (backend or SimulatedGoldBackend()).name,
            "mcnemar_variant": MCNEMAR_VARIANT,
            "stage_seconds": timings,
        },
    )


def _copy_vocabulary(corpus: Corpus) -> ClassVocabulary:
    # Runs may extend the vocabulary (live oracle); never mutate the corpus's.
    vocab = corpus.vocabulary
    return ClassVocabulary.from_labels(
        vocab.labels, [vocab.label(i) for i in sorted(vocab.known_at_start)]
    )
