"""K-means clustering with pluggable distance functions.

Lloyd iterations over euclidean or cosine distance, seeded k-means++
initialization (a uniform-random init is available for fidelity runs),
and deterministic tie-breaking throughout: assignment ties go to the
lowest cluster index, and empty clusters are reseeded to the point
farthest from its current centroid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass
class ClusterConfig:
    m: int
    max_steps: int = 1000
    distance: str = "euclidean"  # "euclidean" | "cosine"
    seed: int = 0
    reseed_empty: bool = True
    init: str = "k-means++"  # "k-means++" | "random"

    def validate(self, n_points: int) -> None:
        if self.m < 1:
            raise ValueError("cluster count must be >= 1")
        if self.m > n_points:
            raise ValueError(f"cluster count {self.m} exceeds point count {n_points}")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.distance not in ("euclidean", "cosine"):
            raise ValueError(f"unknown distance {self.distance!r}")
        if self.init not in ("k-means++", "random"):
            raise ValueError(f"unknown init {self.init!r}")


@dataclass
class KmeansResult:
    partition: list[list[int]]
    centroids: np.ndarray
    n_steps: int
    n_reseeds: int
    objective_trace: list[float] = field(default_factory=list)


def distance(a, b, kind: str = "euclidean") -> float:
    """Euclidean: L2 norm of a-b. Cosine: 1 - cos(a, b); needs nonzero inputs."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("vectors must share a shape")
    if kind == "euclidean":
        return float(np.linalg.norm(a - b))
    if kind == "cosine":
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        if na == 0.0 or nb == 0.0:
            raise ValueError("cosine distance is undefined for zero vectors")
        return float(1.0 - (a @ b) / (na * nb))
    raise ValueError(f"unknown distance {kind!r}")


def _distance_matrix(points: np.ndarray, centers: np.ndarray, kind: str) -> np.ndarray:
    """(n, m) distances; for 'euclidean' these are squared (objective form)."""
    if kind == "euclidean":
        diff = points[:, None, :] - centers[None, :, :]
        return np.einsum("nmd,nmd->nm", diff, diff)
    p_norm = np.linalg.norm(points, axis=1)
    c_norm = np.linalg.norm(centers, axis=1)
    if np.any(p_norm == 0.0) or np.any(c_norm == 0.0):
        raise ValueError("cosine distance is undefined for zero vectors")
    return 1.0 - (points @ centers.T) / np.outer(p_norm, c_norm)


def _init_centers(points: np.ndarray, config: ClusterConfig, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    if config.init == "random":
        return points[rng.choice(n, size=config.m, replace=False)].copy()
    # greedy k-means++: sample candidates by squared-distance weight, keep the
    # one minimizing the resulting potential
    chosen = [int(rng.integers(n))]
    n_trials = 2 + int(np.log(config.m))
    closest = _distance_matrix(points, points[chosen], config.distance)[:, 0]
    while len(chosen) < config.m:
        weights = np.maximum(closest, 0.0)
        total = weights.sum()
        if total <= 0.0:
            remaining = [i for i in range(n) if i not in set(chosen)]
            candidate_ids = np.array(remaining[:1])
        else:
            candidate_ids = rng.choice(n, size=n_trials, p=weights / total)
        best_id, best_potential, best_dist = -1, np.inf, None
        for cid in candidate_ids:
            d_new = _distance_matrix(points, points[[int(cid)]], config.distance)[:, 0]
            reduced = np.minimum(closest, d_new)
            potential = reduced.sum()
            if potential < best_potential:
                best_id, best_potential, best_dist = int(cid), potential, reduced
        chosen.append(best_id)
        closest = best_dist
    return points[chosen].copy()


def _update_centroids(points: np.ndarray, labels: np.ndarray, centers: np.ndarray, kind: str) -> np.ndarray:
    new = centers.copy()
    for j in range(centers.shape[0]):
        members = points[labels == j]
        if members.shape[0] == 0:
            continue
        mean = members.mean(axis=0)
        if kind == "cosine":
            norm = np.linalg.norm(mean)
            if norm > 0.0:
                mean = mean / norm
            else:
                mean = centers[j]  # collapsed mean: keep the previous direction
        new[j] = mean
    return new


def kmeans(points, config: ClusterConfig) -> KmeansResult:
    """Lloyd iterations until assignments stabilize or max_steps is reached.

    Returns the partition (position lists per cluster index) and the final
    centroids. The objective trace records the within-cluster sum of squared
    euclidean distances (or cosine distances) after each update step.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValueError("points must be a non-empty (n, d) array")
    config.validate(pts.shape[0])
    rng = np.random.default_rng(config.seed)
    centers = _init_centers(pts, config, rng)

    labels = None
    n_reseeds = 0
    trace: list[float] = []
    steps = 0
    for steps in range(1, config.max_steps + 1):
        dist = _distance_matrix(pts, centers, config.distance)
        new_labels = dist.argmin(axis=1)

        if config.reseed_empty:
            for j in range(config.m):
                if np.any(new_labels == j):
                    continue
                own = dist[np.arange(pts.shape[0]), new_labels]
                donors = np.flatnonzero(np.bincount(new_labels, minlength=config.m)[new_labels] > 1)
                if donors.size == 0:
                    continue
                far = donors[np.argmax(own[donors])]
                centers[j] = pts[far]
                new_labels[far] = j
                n_reseeds += 1

        if labels is not None and np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels
        centers = _update_centroids(pts, labels, centers, config.distance)
        dist_after = _distance_matrix(pts, centers, config.distance)
        trace.append(float(dist_after[np.arange(pts.shape[0]), labels].sum()))

    partition = [np.flatnonzero(labels == j).tolist() for j in range(config.m)]
    return KmeansResult(partition=partition, centroids=centers, n_steps=steps, n_reseeds=n_reseeds, objective_trace=trace)
