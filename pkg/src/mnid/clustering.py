"""Seeded K-Means (k-means++ init, Lloyd iterations) and agglomerative clustering.

Point ids are sorted internally before any arithmetic, so results are
identical for any permutation of the input and run-to-run reproducible:
reductions always see the same operand order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, KTooLarge, UnknownMethod
from .ingest import EmbeddingMatrix
from .randomness import STREAM_KMEANS, generator


@dataclass
class ClusterSet:
    """A complete partition of the input ids with per-cluster statistics."""

    k: int
    member_ids: list[list[str]]
    assignment: dict[str, int]
    centroids: np.ndarray
    inertia: float

    @classmethod
    def from_assignment(
        cls, ids: list[str], x: EmbeddingMatrix, labels: np.ndarray, k: int
    ) -> "ClusterSet":
        members: list[list[str]] = [[] for _ in range(k)]
        for point_id, label in zip(ids, labels):
            members[int(label)].append(point_id)
        if any(not m for m in members):
            raise ValueError("cluster set must not contain empty clusters")
        centroids = np.stack(
            [x.rows(m).astype(np.float64).mean(axis=0) for m in members]
        )
        inertia = 0.0
        for j, m in enumerate(members):
            diffs = x.rows(m).astype(np.float64) - centroids[j]
            inertia += float(np.sum(diffs * diffs))
        assignment = {pid: j for j, m in enumerate(members) for pid in m}
        return cls(
            k=k,
            member_ids=members,
            assignment=assignment,
            centroids=centroids,
            inertia=inertia,
        )

    def members_by_distance(self, cluster: int, x: EmbeddingMatrix) -> list[str]:
        """Cluster members ordered by distance to the centroid, ties by id."""
        ids = self.member_ids[cluster]
        d = np.linalg.norm(
            x.rows(ids).astype(np.float64) - self.centroids[cluster], axis=1
        )
        return [ids[i] for i in sorted(range(len(ids)), key=lambda i: (d[i], ids[i]))]


def _squared_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # (n, k) matrix of squared Euclidean distances, clipped against fp noise
    sq = (
        np.sum(points * points, axis=1)[:, None]
        - 2.0 * points @ centers.T
        + np.sum(centers * centers, axis=1)[None, :]
    )
    return np.maximum(sq, 0.0)


def _kmeanspp_init(
    points: np.ndarray, k: int, rng: np.random.Generator
) -> np.ndarray:
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = np.full(n, np.inf)
    for _ in range(k - 1):
        d2 = np.minimum(d2, _squared_distances(points, points[chosen[-1:]])[:, 0])
        total = float(d2.sum())
        if total <= 0.0:
            # All remaining mass sits on already-chosen coordinates
            # (duplicate points); fall back to the first unchosen index.
            pick = next(i for i in range(n) if i not in set(chosen))
        else:
            pick = int(rng.choice(n, p=d2 / total))
        chosen.append(pick)
    return points[chosen].copy()


def kmeans(
    ids: list[str],
    x: EmbeddingMatrix,
    k: int,
    seed: int,
    max_iter: int = 300,
    tol: float = 1e-6,
) -> ClusterSet:
    """Lloyd's algorithm with k-means++ initialization.

    Assignment ties go to the lowest cluster index; a cluster emptied by an
    assignment step is refilled with the point farthest from its currently
    assigned centroid (ties by lowest id).
    """
    if not ids:
        raise EmptyInput("kmeans needs at least one point")
    if k < 1 or k > len(ids):
        raise KTooLarge(f"k={k} outside [1, {len(ids)}]")
    order = sorted(ids)
    points = x.rows(order).astype(np.float64)
    rng = generator(seed, STREAM_KMEANS)
    centers = _kmeanspp_init(points, k, rng)

    labels = np.zeros(len(order), dtype=np.intp)
    prev_inertia = np.inf
    for _ in range(max_iter):
        d2 = _squared_distances(points, centers)
        labels = np.argmin(d2, axis=1)
        counts = np.bincount(labels, minlength=k)
        for j in np.where(counts == 0)[0]:
            point_d2 = d2[np.arange(len(order)), labels]
            candidates = np.where(counts[labels] >= 2)[0]
            far = min(candidates, key=lambda c: (-point_d2[c], order[c]))
            counts[labels[far]] -= 1
            labels[far] = j
            counts[j] = 1
            centers[j] = points[far]
            d2[:, j] = _squared_distances(points, centers[j : j + 1])[:, 0]
        inertia = float(d2[np.arange(len(order)), labels].sum())
        if inertia > prev_inertia * (1.0 + 1e-9) + 1e-12:
            raise AssertionError("Lloyd iteration increased inertia")
        prev_inertia = inertia
        new_centers = np.stack(
            [points[labels == j].mean(axis=0) for j in range(k)]
        )
        shift = float(np.linalg.norm(new_centers - centers, axis=1).max())
        centers = new_centers
        if shift < tol:
            break
    return ClusterSet.from_assignment(order, x, labels, k)


def agglomerative(
    ids: list[str],
    x: EmbeddingMatrix,
    k: int,
    linkage: str = "average",
) -> ClusterSet:
    """Bottom-up Euclidean-linkage clustering down to ``k`` clusters.

    Merge ties are broken by the lexicographically lowest pair of smallest
    member ids, making the merge sequence input-order independent.
    """
    if linkage not in ("average", "complete"):
        raise UnknownMethod(f"unknown linkage {linkage!r}")
    if not ids:
        raise EmptyInput("agglomerative needs at least one point")
    if k < 1 or k > len(ids):
        raise KTooLarge(f"k={k} outside [1, {len(ids)}]")
    order = sorted(ids)
    points = x.rows(order).astype(np.float64)
    n = len(order)

    dist = np.sqrt(_squared_distances(points, points))
    np.fill_diagonal(dist, np.inf)
    active = [True] * n
    sizes = [1] * n
    members: list[list[int]] = [[i] for i in range(n)]
    n_active = n

    while n_active > k:
        m = float(dist.min())
        pairs = np.argwhere(dist == m)
        best = min(
            (tuple(sorted((members[i][0], members[j][0]))), i, j)
            for i, j in pairs
            if i < j
        )
        _, i, j = best
        if members[j][0] < members[i][0]:
            i, j = j, i
        others = [t for t in range(n) if active[t] and t not in (i, j)]
        if linkage == "average":
            merged = (sizes[i] * dist[i, others] + sizes[j] * dist[j, others]) / (
                sizes[i] + sizes[j]
            )
        else:
            merged = np.maximum(dist[i, others], dist[j, others])
        dist[i, others] = merged
        dist[others, i] = merged
        dist[j, :] = np.inf
        dist[:, j] = np.inf
        members[i] = sorted(members[i] + members[j])
        sizes[i] += sizes[j]
        active[j] = False
        n_active -= 1

    labels = np.zeros(n, dtype=np.intp)
    # Final cluster indices ordered by smallest member id.
    slots = sorted((t for t in range(n) if active[t]), key=lambda t: members[t][0])
    for idx, slot in enumerate(slots):
        for point in members[slot]:
            labels[point] = idx
    return ClusterSet.from_assignment(order, x, labels, k)
