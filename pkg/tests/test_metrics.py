import itertools
import math

import numpy as np
import pytest

from clipsort.metrics import cluster_iou, ordering_score, ordering_score_bruteforce


def test_identity_prediction_is_perfect():
    p = np.arange(4)
    assert ordering_score(p, p, 2).score == 1.0


def test_reversal_scores_zero():
    gt = np.arange(4)
    rev = gt[::-1].copy()
    assert ordering_score(gt, rev, 2).score == 0.0
    assert ordering_score(gt, rev, 3).score == 0.0


def test_swap_first_two_items():
    # brute-force over all C(4,2)=6 pairs: only the swapped pair discords
    gt = np.arange(4)
    pred = np.array([1, 0, 2, 3])
    res = ordering_score(gt, pred, 2)
    assert (res.matches, res.total) == (5, 6)
    brute = ordering_score_bruteforce(gt, pred, 2)
    assert (brute.matches, brute.total) == (5, 6)


@pytest.mark.parametrize("beta", [2, 3, 4])
def test_dp_equals_bruteforce_exhaustive_n5(beta):
    gt = np.arange(5)
    for perm in itertools.permutations(range(5)):
        pred = np.array(perm)
        fast = ordering_score(gt, pred, beta)
        brute = ordering_score_bruteforce(gt, pred, beta)
        assert (fast.matches, fast.total) == (brute.matches, brute.total)


def test_dp_equals_bruteforce_random_pairs(rng):
    for _ in range(100):
        n = int(rng.integers(4, 11))
        gt = rng.permutation(n)
        pred = rng.permutation(n)
        for beta in (2, 3, min(4, n)):
            fast = ordering_score(gt, pred, beta)
            brute = ordering_score_bruteforce(gt, pred, beta)
            assert (fast.matches, fast.total) == (brute.matches, brute.total)


def test_score_invariant_under_joint_relabeling(rng):
    for _ in range(30):
        n = int(rng.integers(3, 10))
        gt, pred, relabel = rng.permutation(n), rng.permutation(n), rng.permutation(n)
        base = ordering_score(gt, pred, 2)
        moved = ordering_score(relabel[gt], relabel[pred], 2)
        assert base.matches == moved.matches


def test_random_prediction_means():
    rng = np.random.default_rng(42)
    s2, s3 = [], []
    for _ in range(10_000):
        n = int(rng.integers(10, 21))
        gt = rng.permutation(n)
        pred = rng.permutation(n)
        s2.append(ordering_score(gt, pred, 2).score)
        s3.append(ordering_score(gt, pred, 3).score)
    assert 0.49 <= np.mean(s2) <= 0.51
    assert 0.160 <= np.mean(s3) <= 0.174


def test_beta_bounds_rejected():
    p = np.arange(4)
    with pytest.raises(ValueError):
        ordering_score(p, p, 1)
    with pytest.raises(ValueError):
        ordering_score(p, p, 5)


def test_length_mismatch_rejected():
    with pytest.raises(ValueError):
        ordering_score(np.arange(4), np.arange(5), 2)


def test_bruteforce_size_guard():
    p = np.arange(13)
    with pytest.raises(ValueError, match="capped"):
        ordering_score_bruteforce(p, p, 2)


def test_total_is_binomial():
    gt = np.arange(6)
    assert ordering_score(gt, gt, 3).total == math.comb(6, 3)


# --- cluster IoU ---


def test_cluster_iou_identical_partitions():
    parts = [[0, 1], [2, 3]]
    feats = np.array([[1.0, 0.0], [1.0, 0.1], [0.0, 1.0], [0.1, 1.0]])
    centers = [feats[g].mean(axis=0) for g in parts]
    ev = cluster_iou(parts, parts, centers, [feats[g] for g in parts])
    assert ev.mean_iou == 1.0


def test_cluster_iou_single_pred_cluster():
    # matched pair IoU 2/4, unmatched gt cluster contributes 0, divisor 2
    feats = np.array([[1.0, 0.0], [1.0, 0.1], [0.0, 1.0], [0.1, 1.0]])
    pred = [[0, 1, 2, 3]]
    gt = [[0, 1], [2, 3]]
    ev = cluster_iou(pred, gt, [feats.mean(axis=0)], [feats[g] for g in gt])
    assert ev.mean_iou == pytest.approx(0.25)


def test_cluster_iou_label_permutation_recovered():
    feats = np.array([[2.0, 0.0], [2.0, 0.2], [0.0, 2.0], [0.2, 2.0]])
    gt = [[0, 1], [2, 3]]
    pred = [[2, 3], [0, 1]]  # same sets, swapped labels
    centers = [feats[g].mean(axis=0) for g in pred]
    ev = cluster_iou(pred, gt, centers, [feats[g] for g in gt])
    assert ev.mean_iou == 1.0


def test_cluster_iou_requires_same_coverage():
    feats = np.eye(3)
    with pytest.raises(ValueError, match="cover"):
        cluster_iou([[0, 1]], [[0, 1, 2]], [feats[0]], [feats])


def test_cluster_iou_rejects_empty():
    with pytest.raises(ValueError, match="empty"):
        cluster_iou([], [[0]], [], [np.eye(2)])
