"""Pairwise score matrices and maximum-weight path search.

``score_matrix`` turns order-classifier logits for every ordered item pair
into a signed confidence in (-1, 1) that item i directly precedes item j
(algebraically tanh((logit1 - logit0) / 2)). ``beam_search`` looks for the
heaviest Hamiltonian path through that weighted adjacency, tracking the top
``bsize`` partial paths from every start node; ``exact_max_path`` is its
brute-force oracle. Ties always break toward the lexicographically smallest
order so results are reproducible.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import ModelParams, phi_forward_batch

EXACT_MAX_N = 10

_OPEN_LO = np.nextafter(-1.0, 0.0)
_OPEN_HI = np.nextafter(1.0, 0.0)


@dataclass(frozen=True)
class ScoreMatrix:
    """n x n adjacency; entry [i, j] = confidence that i directly precedes j."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] < 1:
            raise ValueError("weights must be a non-empty square matrix")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        off = ~np.eye(w.shape[0], dtype=bool)
        if np.any(np.abs(w[off]) >= 1.0):
            raise ValueError("off-diagonal weights must lie strictly inside (-1, 1)")
        if np.any(np.diag(w) != 0.0):
            raise ValueError("diagonal must be zero")
        w = w.copy()
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class PathResult:
    order: np.ndarray
    weight: float


def pair_confidence(logits) -> float:
    """Signed precedence confidence from 2 logits, strictly inside (-1, 1)."""
    z = np.asarray(logits, dtype=np.float64)
    value = np.tanh((z[..., 1] - z[..., 0]) / 2.0)
    return np.clip(value, _OPEN_LO, _OPEN_HI)


def score_matrix(items: Sequence[np.ndarray], params: ModelParams, level: str = "frame") -> ScoreMatrix:
    """Fill every ordered pair (i != j) with the classifier's confidence."""
    reps = np.atleast_2d(np.asarray(items, dtype=np.float64))
    n = reps.shape[0]
    weights = np.zeros((n, n))
    if n > 1:
        ii, jj = np.where(~np.eye(n, dtype=bool))
        logits = phi_forward_batch(params, reps[ii], reps[jj], level)
        weights[ii, jj] = pair_confidence(logits)
    return ScoreMatrix(weights)


def comparator_matrix(keys, confidence: float = 0.5) -> ScoreMatrix:
    """Antisymmetric matrix from known sort keys (test/oracle comparator)."""
    k = np.asarray(keys)
    n = k.size
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must lie in (0, 1)")
    weights = np.where(k[:, None] < k[None, :], confidence, -confidence)
    np.fill_diagonal(weights, 0.0)
    return ScoreMatrix(weights)


def _better(candidate: tuple[float, tuple[int, ...]], incumbent: tuple[float, tuple[int, ...]] | None) -> bool:
    if incumbent is None:
        return True
    if candidate[0] != incumbent[0]:
        return candidate[0] > incumbent[0]
    return candidate[1] < incumbent[1]


def beam_search(matrix: ScoreMatrix, bsize: int) -> PathResult:
    """Heaviest-path search keeping the top ``bsize`` partial paths per step.

    Partial paths grow one node at a time from every possible start node;
    with ``bsize >= (n-1)!`` the search is exhaustive. Path weight is the
    sum of consecutive-edge weights (0 for a single node).
    """
    if bsize < 1:
        raise ValueError("bsize must be >= 1")
    w = matrix.weights
    n = matrix.n
    if n == 1:
        return PathResult(np.zeros(1, dtype=np.int64), 0.0)

    best: tuple[float, tuple[int, ...]] | None = None
    for start in range(n):
        beam: list[tuple[float, tuple[int, ...]]] = [(0.0, (start,))]
        for _ in range(n - 1):
            candidates: list[tuple[float, tuple[int, ...]]] = []
            for weight, path in beam:
                used = set(path)
                last = path[-1]
                for nxt in range(n):
                    if nxt not in used:
                        candidates.append((weight + w[last, nxt], path + (nxt,)))
            candidates.sort(key=lambda t: (-t[0], t[1]))
            beam = candidates[:bsize]
        if _better(beam[0], best):
            best = beam[0]
    return PathResult(np.array(best[1], dtype=np.int64), best[0])


def exact_max_path(matrix: ScoreMatrix) -> PathResult:
    """Global maximum-weight path by full enumeration (oracle; n <= 10)."""
    n = matrix.n
    if n > EXACT_MAX_N:
        raise ValueError(f"exact search capped at n={EXACT_MAX_N}, got {n}")
    if n == 1:
        return PathResult(np.zeros(1, dtype=np.int64), 0.0)
    w = matrix.weights
    best_order: tuple[int, ...] | None = None
    best_weight = -np.inf
    # itertools yields orders lexicographically, so the first strict maximum
    # is also the lexicographically smallest among ties
    for perm in itertools.permutations(range(n)):
        weight = 0.0
        for a, b in zip(perm[:-1], perm[1:]):
            weight += w[a, b]
        if weight > best_weight:
            best_weight = weight
            best_order = perm
    return PathResult(np.array(best_order, dtype=np.int64), best_weight)
