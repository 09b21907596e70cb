"""Ordering and cluster-quality metrics.

The ordering score of a prediction against ground truth is the fraction of
beta-element position subsets whose items appear in the same relative order
in both sequences (beta=2: pairwise score, beta=3: triplet score). Two
routes are provided: a dynamic program counting length-beta increasing
subsequences of the composed permutation, and a brute-force subset
enumeration used as its oracle. Counts are exact integers, so the two can
be compared as rationals.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .types import check_permutation, invert_permutation

BRUTE_FORCE_MAX_N = 12


@dataclass(frozen=True)
class OrderingResult:
    beta: int
    matches: int
    total: int

    @property
    def score(self) -> float:
        return self.matches / self.total


@dataclass(frozen=True)
class ClusterEval:
    mean_iou: float
    assignment: tuple[tuple[int, int], ...]


def _composed(gt, pred) -> np.ndarray:
    """Predicted temporal rank of each item, listed in ground-truth order."""
    gt = check_permutation(gt)
    pred = check_permutation(pred)
    if gt.size != pred.size:
        raise ValueError("gt and pred permutations differ in length")
    return invert_permutation(pred)[gt]


def _check_beta(beta: int, n: int) -> None:
    if beta < 2:
        raise ValueError("beta must be at least 2")
    if beta > n:
        raise ValueError(f"beta={beta} exceeds sequence length {n}")


def ordering_score(gt, pred, beta: int) -> OrderingResult:
    """Ordering score via an O(N^2 * beta) increasing-subsequence count."""
    sigma = _composed(gt, pred)
    n = sigma.size
    _check_beta(beta, n)
    ascending = sigma[:, None] < sigma[None, :]
    ordered = np.triu(np.ones((n, n), dtype=bool), k=1)
    step = (ascending & ordered).astype(np.int64)
    counts = np.ones(n, dtype=np.int64)
    for _ in range(beta - 1):
        counts = counts @ step
    return OrderingResult(beta=beta, matches=int(counts.sum()), total=math.comb(n, beta))


def ordering_score_bruteforce(gt, pred, beta: int) -> OrderingResult:
    """Oracle form: explicit enumeration of all C(N, beta) item subsets.

    A subset matches when walking it in ground-truth order also walks it in
    predicted order (both ranks ascending together).
    """
    gt = check_permutation(gt)
    pred = check_permutation(pred)
    if gt.size != pred.size:
        raise ValueError("gt and pred permutations differ in length")
    n = gt.size
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force capped at N={BRUTE_FORCE_MAX_N}, got {n}")
    _check_beta(beta, n)
    gt_rank = invert_permutation(gt)
    pred_rank = invert_permutation(pred)
    matches = 0
    for combo in itertools.combinations(range(n), beta):
        by_gt = sorted(combo, key=lambda item: gt_rank[item])
        if all(pred_rank[by_gt[k]] < pred_rank[by_gt[k + 1]] for k in range(beta - 1)):
            matches += 1
    return OrderingResult(beta=beta, matches=matches, total=math.comb(n, beta))


def _cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def cluster_iou(
    pred_partition: Sequence[Sequence[int]],
    gt_partition: Sequence[Sequence[int]],
    pred_centers: Sequence[np.ndarray],
    gt_features: Sequence[np.ndarray],
) -> ClusterEval:
    """Mean IoU between predicted and ground-truth clusters.

    Predicted centers are matched one-to-one against the means of the
    ground-truth clusters by maximizing total cosine similarity (Hungarian
    assignment). Unmatched clusters on either side contribute IoU 0: the
    mean divides by max(#pred, #gt).
    """
    if len(pred_partition) == 0 or len(gt_partition) == 0:
        raise ValueError("empty partition")
    if len(pred_centers) != len(pred_partition):
        raise ValueError("one center required per predicted cluster")
    if len(gt_features) != len(gt_partition):
        raise ValueError("one feature list required per ground-truth cluster")
    pred_cover = sorted(p for group in pred_partition for p in group)
    gt_cover = sorted(p for group in gt_partition for p in group)
    if pred_cover != gt_cover:
        raise ValueError("partitions do not cover the same position set")

    gt_means = [np.mean(np.asarray(feats, dtype=np.float64), axis=0) for feats in gt_features]
    sim = np.array(
        [[_cosine_similarity(np.asarray(c, dtype=np.float64), m) for m in gt_means] for c in pred_centers]
    )
    rows, cols = linear_sum_assignment(-sim)

    pred_sets = [set(g) for g in pred_partition]
    gt_sets = [set(g) for g in gt_partition]
    total = 0.0
    assignment = []
    for i, j in sorted(zip(rows.tolist(), cols.tolist())):
        union = pred_sets[i] | gt_sets[j]
        if union:
            total += len(pred_sets[i] & gt_sets[j]) / len(union)
        assignment.append((i, j))
    denom = max(len(pred_partition), len(gt_partition))
    return ClusterEval(mean_iou=total / denom, assignment=tuple(assignment))
