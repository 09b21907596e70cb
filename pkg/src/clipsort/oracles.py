"""Brute-force cross-checks wired into the ``oracle`` CLI subcommand.

Each check pits a production path against an independent oracle: the
dynamic-program ordering score against subset enumeration, beam search with
an exhaustive width against full path enumeration, and analytic gradients
against central finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .metrics import ordering_score, ordering_score_bruteforce
from .model import (
    ModelConfig,
    TrainingPair,
    grad_vector,
    init_params,
    loss_total,
    pack_params,
    set_params_vector,
)
from .reorder import ScoreMatrix, beam_search, exact_max_path
from .util import derive_seed


@dataclass(frozen=True)
class OracleFailure:
    check: str
    detail: str


def fd_gradient(loss_fn: Callable[[np.ndarray], float], x0: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function."""
    grad = np.zeros_like(x0)
    for k in range(x0.size):
        x = x0.copy()
        x[k] += step
        up = loss_fn(x)
        x[k] -= 2 * step
        down = loss_fn(x)
        grad[k] = (up - down) / (2 * step)
    return grad


def check_ordering_metric(n_random: int = 200, seed: int = 0) -> list[OracleFailure]:
    """DP score vs. subset enumeration: exhaustive at N=5, random up to N=10."""
    failures = []
    import itertools

    identity = np.arange(5)
    for perm in itertools.permutations(range(5)):
        pred = np.array(perm)
        for beta in (2, 3, 4):
            fast = ordering_score(identity, pred, beta)
            brute = ordering_score_bruteforce(identity, pred, beta)
            if (fast.matches, fast.total) != (brute.matches, brute.total):
                failures.append(OracleFailure("ordering", f"N=5 perm={perm} beta={beta}"))
    rng = np.random.default_rng(derive_seed(seed, "oracle/ordering"))
    for trial in range(n_random):
        n = int(rng.integers(4, 11))
        gt = rng.permutation(n)
        pred = rng.permutation(n)
        for beta in (2, 3, min(4, n)):
            fast = ordering_score(gt, pred, beta)
            brute = ordering_score_bruteforce(gt, pred, beta)
            if (fast.matches, fast.total) != (brute.matches, brute.total):
                failures.append(OracleFailure("ordering", f"trial={trial} N={n} beta={beta}"))
    return failures


def check_beam_optimality(n_instances: int = 500, seed: int = 0) -> list[OracleFailure]:
    """Beam search with bsize >= (n-1)! must equal exact enumeration."""
    failures = []
    rng = np.random.default_rng(derive_seed(seed, "oracle/beam"))
    for trial in range(n_instances):
        n = int(rng.integers(2, 7))
        weights = rng.uniform(-0.95, 0.95, size=(n, n))
        np.fill_diagonal(weights, 0.0)
        matrix = ScoreMatrix(weights)
        beam = beam_search(matrix, bsize=math.factorial(n - 1))
        exact = exact_max_path(matrix)
        if beam.weight != exact.weight or not np.array_equal(beam.order, exact.order):
            failures.append(
                OracleFailure("beam", f"trial={trial} n={n} beam={beam.weight} exact={exact.weight}")
            )
    return failures


def check_gradients(
    n_seeds: int = 10,
    step: float = 1e-5,
    rel_tol: float = 1e-4,
    lambda_: float = 0.75,
) -> list[OracleFailure]:
    """Analytic gradients vs. central differences over every parameter."""
    failures = []
    for s in range(n_seeds):
        config = ModelConfig(d_v=3, d_u=2, hidden_dim=6, proj_dim=4, n_negatives=3, seed=s)
        params = init_params(config)
        rng = np.random.default_rng(derive_seed(s, "oracle/grad"))
        d = config.input_dim
        pair = TrainingPair(
            a=rng.standard_normal(d),
            b=rng.standard_normal(d),
            order_label=int(rng.integers(2)),
            negatives=rng.standard_normal((config.n_negatives, d)),
            level=("frame", "shot", "scene")[s % 3],
        )
        analytic = grad_vector(pair, params, lambda_)
        x0 = pack_params(params)

        def loss_fn(vec, pair=pair, params=params):
            set_params_vector(params, vec)
            return loss_total(pair, params, lambda_)

        numeric = fd_gradient(loss_fn, x0, step)
        set_params_vector(params, x0)
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-6)
        rel = np.abs(analytic - numeric) / denom
        worst = float(rel.max())
        if worst > rel_tol:
            failures.append(OracleFailure("gradient", f"seed={s} max_rel_err={worst:.3e}"))
    return failures


def run_all(seed: int = 0, n_instances: int = 500) -> list[OracleFailure]:
    failures = []
    failures += check_ordering_metric(seed=seed)
    failures += check_beam_optimality(n_instances=n_instances, seed=seed)
    failures += check_gradients()
    return failures
