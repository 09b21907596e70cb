import math
from dataclasses import replace

import numpy as np
import pytest

from clipsort.datagen import GenConfig, generate_clip, shuffle_clip
from clipsort.model import (
    LEVELS,
    ModelConfig,
    ModelParams,
    TrainingDivergedError,
    TrainingPair,
    backward,
    encode_frame,
    grad_vector,
    init_params,
    level_representations,
    load_checkpoint,
    loss_cl,
    loss_cls,
    loss_parts,
    loss_total,
    pack_params,
    pairwise_accuracy,
    phi_forward,
    pool_group,
    psi_forward,
    sample_pairs,
    save_checkpoint,
    set_params_vector,
    train,
)
from clipsort.nn import Mlp
from clipsort.oracles import fd_gradient
from clipsort.util import derive_seed

from conftest import make_clip


def small_config(**kw):
    defaults = dict(d_v=3, d_u=2, hidden_dim=6, proj_dim=4, n_negatives=3, seed=0)
    defaults.update(kw)
    return ModelConfig(**defaults)


def custom_params(config, phi_net, psi_net):
    """ModelParams with the same hand-built networks at every level."""
    keys = ("shared",) if config.share_heads else LEVELS
    return ModelParams(config, {k: phi_net for k in keys}, {k: psi_net for k in keys})


def zero_phi(config):
    d = 2 * config.input_dim
    return Mlp([np.zeros((d, 2))], [np.zeros(2)])


def random_pair(config, rng, level="frame"):
    d = config.input_dim
    return TrainingPair(
        a=rng.standard_normal(d),
        b=rng.standard_normal(d),
        order_label=int(rng.integers(2)),
        negatives=rng.standard_normal((config.n_negatives, d)),
        level=level,
    )


# --- encode / pool ---


def test_encode_frame_concatenates():
    assert np.array_equal(encode_frame([1.0, 2.0], [3.0]), [1.0, 2.0, 3.0])


def test_encode_frame_zero_text():
    out = encode_frame([1.0, 2.0], [0.0, 0.0])
    assert np.array_equal(out, [1.0, 2.0, 0.0, 0.0])


def test_encode_frame_dim_check(rng):
    cfg = small_config()
    out = encode_frame(rng.standard_normal(3), rng.standard_normal(2), cfg)
    assert out.size == cfg.input_dim
    with pytest.raises(ValueError):
        encode_frame(rng.standard_normal(4), rng.standard_normal(2), cfg)


def test_pool_single_member():
    x = np.array([1.0, 2.0])
    assert np.array_equal(pool_group([x]), x)


def test_pool_mean_and_symmetry(rng):
    a, b = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    assert np.array_equal(pool_group([a, b]), [0.5, 0.5])
    members = [rng.standard_normal(4) for _ in range(5)]
    shuffled = [members[i] for i in rng.permutation(5)]
    assert np.allclose(pool_group(members), pool_group(shuffled))


def test_pool_rejects_empty():
    with pytest.raises(ValueError):
        pool_group([])


# --- forward passes ---


def test_phi_zero_weights_gives_zero_logits():
    cfg = small_config()
    params = custom_params(cfg, zero_phi(cfg), init_params(cfg).psi("frame"))
    logits = phi_forward(params, np.ones(cfg.input_dim), np.ones(cfg.input_dim))
    assert np.array_equal(logits, [0.0, 0.0])


def test_phi_deterministic(rng):
    params = init_params(small_config())
    a, b = rng.standard_normal(5), rng.standard_normal(5)
    assert np.array_equal(phi_forward(params, a, b), phi_forward(params, a, b))


def test_phi_hand_set_affine():
    # single linear layer on the concatenation of two (1+1)-D inputs:
    # logits = [a+2b+0.5, 3a-b] on the vision components
    cfg = small_config(d_v=1, d_u=1)
    w = np.array([[1.0, 3.0], [0.0, 0.0], [2.0, -1.0], [0.0, 0.0]])
    b = np.array([0.5, 0.0])
    params = custom_params(cfg, Mlp([w], [b]), init_params(cfg).psi("frame"))
    logits = phi_forward(params, [2.0, 0.0], [5.0, 0.0])
    assert np.allclose(logits, [2.0 + 2 * 5.0 + 0.5, 3 * 2.0 - 5.0])


def test_psi_outputs_unit_norm(rng):
    params = init_params(small_config())
    for _ in range(10):
        out = psi_forward(params, rng.standard_normal(5))
        assert abs(np.linalg.norm(out) - 1.0) < 1e-9


def test_psi_zero_weights_nonzero_bias():
    cfg = small_config()
    psi = Mlp([np.zeros((cfg.input_dim, 2))], [np.array([3.0, 4.0])])
    params = custom_params(cfg, zero_phi(cfg), psi)
    out = psi_forward(params, np.ones(cfg.input_dim))
    assert np.allclose(out, [0.6, 0.8])


def test_psi_rejects_zero_projection():
    cfg = small_config()
    psi = Mlp([np.zeros((cfg.input_dim, 2))], [np.zeros(2)])
    params = custom_params(cfg, zero_phi(cfg), psi)
    with pytest.raises(ValueError, match="zero vector"):
        psi_forward(params, np.ones(cfg.input_dim))


def test_psi_identity_projection():
    cfg = small_config(d_v=1, d_u=1)
    psi = Mlp([np.eye(2)], [np.zeros(2)])
    params = custom_params(cfg, zero_phi(cfg), psi)
    assert np.allclose(psi_forward(params, [3.0, 4.0]), [0.6, 0.8])


# --- losses ---


def test_loss_cls_uniform_logits():
    assert loss_cls([0.0, 0.0], 0) == pytest.approx(math.log(2), abs=1e-12)
    assert loss_cls([0.0, 0.0], 1) == pytest.approx(math.log(2), abs=1e-12)


def test_loss_cls_saturation():
    assert loss_cls([0.0, 50.0], 1) < 1e-9


def test_loss_cls_closed_form():
    assert loss_cls([0.0, math.log(3)], 1) == pytest.approx(-math.log(0.75), abs=1e-12)


def test_loss_cls_swap_symmetry(rng):
    for _ in range(20):
        z = rng.standard_normal(2)
        assert loss_cls(z, 1) == pytest.approx(loss_cls(z[::-1], 0), abs=1e-12)


def test_loss_cl_equal_similarities():
    a = np.array([1.0, 0.0])
    p = np.array([0.0, 1.0])
    for n in (1, 4, 8):
        negs = np.tile(p, (n, 1))
        assert loss_cl(a, p, negs) == pytest.approx(math.log(n + 1), abs=1e-9)


def test_loss_cl_closed_form():
    # one negative, a.p = 1, a.q = 0
    a = np.array([1.0, 0.0])
    p = np.array([1.0, 0.0])
    q = np.array([[0.0, 1.0]])
    assert loss_cl(a, p, q) == pytest.approx(math.log(1 + math.exp(-1)), abs=1e-12)


def test_loss_cl_saturation_and_nonnegative(rng):
    a = np.array([1.0, 0.0])
    assert loss_cl(30 * a, a, np.array([[0.0, 1.0]])) < 1e-9
    for _ in range(20):
        e = rng.standard_normal((5, 3))
        assert loss_cl(e[0], e[1], e[2:]) >= 0.0


def test_loss_total_lambda_zero_is_cls():
    cfg = small_config()
    params = init_params(cfg)
    pair = random_pair(cfg, np.random.default_rng(3))
    cls, _, total = loss_parts(pair, params, 0.0)
    assert total == pytest.approx(cls, abs=1e-12)


def test_loss_total_linear_combination():
    # phi all-zero -> cls = ln 2; psi constant unit output -> cl = ln(n+1) = ln 3
    cfg = small_config(n_negatives=2)
    psi = Mlp([np.zeros((cfg.input_dim, 2))], [np.array([1.0, 0.0])])
    params = custom_params(cfg, zero_phi(cfg), psi)
    pair = random_pair(cfg, np.random.default_rng(0))
    cls, cl, total = loss_parts(pair, params, 0.75)
    assert cls == pytest.approx(math.log(2), abs=1e-12)
    assert cl == pytest.approx(math.log(3), abs=1e-12)
    assert total == pytest.approx(math.log(2) + 0.75 * math.log(3), abs=1e-12)
    assert total == pytest.approx(1.517106, abs=1e-5)


# --- gradients ---


@pytest.mark.parametrize("seed", range(3))
def test_backward_matches_finite_differences(seed):
    cfg = small_config(seed=seed)
    params = init_params(cfg)
    pair = random_pair(cfg, np.random.default_rng(seed + 10), level=LEVELS[seed % 3])
    analytic = grad_vector(pair, params, 0.75)
    x0 = pack_params(params)

    def loss_fn(vec):
        set_params_vector(params, vec)
        return loss_total(pair, params, 0.75)

    numeric = fd_gradient(loss_fn, x0, step=1e-5)
    set_params_vector(params, x0)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-6)
    assert float(np.max(np.abs(analytic - numeric) / denom)) < 1e-4


def test_gradient_scales_linearly_with_lambda():
    cfg = small_config()
    params = init_params(cfg)
    pair = random_pair(cfg, np.random.default_rng(5))
    g0 = grad_vector(pair, params, 0.0)
    g1 = grad_vector(pair, params, 1.0)
    g_half = grad_vector(pair, params, 0.5)
    assert np.allclose(g_half - g0, 0.5 * (g1 - g0), atol=1e-12)


def test_saturated_example_has_tiny_gradients():
    cfg = small_config()
    # phi output hugely confident in the true class, lambda 0
    w = np.zeros((2 * cfg.input_dim, 2))
    params = custom_params(cfg, Mlp([w], [np.array([-40.0, 40.0])]), init_params(cfg).psi("frame"))
    pair = random_pair(cfg, np.random.default_rng(2))
    pair.order_label = 1
    grads = backward(pair, params, 0.0)
    flat = np.concatenate([g.ravel() for gw, gb in grads.values() for g in gw + gb])
    assert np.max(np.abs(flat)) < 1e-12


# --- pair sampling ---


def two_frame_clip():
    return make_clip([2, 1], clip_id="c2f")


def structured_clips(n_clips=4, seed=0):
    clips = []
    for i in range(n_clips):
        cfg = GenConfig(
            n_scenes=2, shots_per_scene=2, frames_per_shot=3, d_v=8, d_u=4,
            seed=derive_seed(seed, f"clip{i}"), space_seed=seed,
        )
        clip, _ = generate_clip(cfg, clip_id=f"c{i}")
        clips.append(shuffle_clip(clip, derive_seed(seed, f"sh{i}")))
    return clips


def test_two_frame_clip_emits_both_orders():
    cfg = small_config(d_v=2, d_u=1, n_negatives=1)
    clips = [two_frame_clip(), make_clip([1, 2], clip_id="other", shot_ids=[9, 9])]
    sampled = sample_pairs(clips, cfg, "frame", rng_seed=0)
    # every unordered pair appears in both orientations with complementary labels
    assert len(sampled.pairs) == 4  # one unordered pair per 2-frame clip, x2
    labels = sorted(p.order_label for p in sampled.pairs)
    assert labels.count(0) == labels.count(1)
    by_key = {}
    for p in sampled.pairs:
        by_key.setdefault((p.a.tobytes(), p.b.tobytes()), []).append(p.order_label)
    for (a_key, b_key), labels in by_key.items():
        assert by_key[(b_key, a_key)] == [1 - labels[0]]


def test_frame_negatives_avoid_anchor_shot():
    clips = structured_clips()
    cfg = small_config(d_v=8, d_u=4, n_negatives=4, pairs_per_clip=6)
    sampled = sample_pairs(clips, cfg, "frame", rng_seed=1)
    assert sampled.pairs
    reps = {}
    for clip in clips:
        items = level_representations(clip)["frame"]
        for rep, group in zip(items.reps, items.groups):
            reps[rep.tobytes()] = group
    for pair in sampled.pairs[:200]:
        anchor_group = reps[pair.a.tobytes()]
        for neg in pair.negatives:
            assert reps[neg.tobytes()] != anchor_group


def test_sample_pairs_deterministic():
    clips = structured_clips()
    cfg = small_config(d_v=8, d_u=4)
    s1 = sample_pairs(clips, cfg, "frame", rng_seed=7)
    s2 = sample_pairs(clips, cfg, "frame", rng_seed=7)
    assert len(s1.pairs) == len(s2.pairs)
    for p1, p2 in zip(s1.pairs, s2.pairs):
        assert np.array_equal(p1.a, p2.a) and p1.order_label == p2.order_label
        assert np.array_equal(p1.negatives, p2.negatives)


def test_sample_pairs_label_balance():
    clips = structured_clips(6)
    cfg = small_config(d_v=8, d_u=4, pairs_per_clip=10)
    sampled = sample_pairs(clips, cfg, "frame", rng_seed=3)
    labels = [p.order_label for p in sampled.pairs]
    assert abs(np.mean(labels) - 0.5) < 0.02


def test_sample_pairs_negative_count():
    cfg = small_config(d_v=8, d_u=4, n_negatives=5)
    sampled = sample_pairs(structured_clips(2), cfg, "scene", rng_seed=0)
    assert sampled.pairs
    assert all(p.negatives.shape[0] == 5 for p in sampled.pairs)


def test_sample_pairs_skipped_count():
    cfg = small_config(d_v=2, d_u=1, n_negatives=1)
    clips = [make_clip([1], clip_id="one"), make_clip([1, 2], clip_id="two", shot_ids=[5, 6])]
    sampled = sample_pairs(clips, cfg, "frame", rng_seed=0)
    assert sampled.skipped_clips == 1


# --- training ---


def test_train_zero_epochs_returns_init():
    clips = structured_clips(2)
    cfg = small_config(d_v=8, d_u=4, epochs=0)
    params, trace = train(clips, cfg)
    ref = init_params(cfg)
    assert trace == []
    assert np.array_equal(pack_params(params), pack_params(ref))


def test_train_bit_reproducible():
    clips = structured_clips(3)
    cfg = small_config(d_v=8, d_u=4, hidden_dim=16, epochs=1, pairs_per_clip=4)
    p1, t1 = train(clips, cfg)
    p2, t2 = train(clips, cfg)
    assert np.array_equal(pack_params(p1), pack_params(p2))
    assert t1 == t2


def test_train_diverges_with_absurd_lr():
    clips = structured_clips(2)
    cfg = small_config(d_v=8, d_u=4, epochs=3, lr=1e18)
    with pytest.raises(TrainingDivergedError, match="step"):
        train(clips, cfg)


def monotone_clips(n_clips, seed, n_frames=10, noise=0.05):
    """1-D drift: frame i's feature is i plus small noise."""
    from clipsort.types import ClipPuzzle, FrameRecord

    rng = np.random.default_rng(seed)
    clips = []
    for c in range(n_clips):
        gt = rng.permutation(n_frames) + 1
        frames = tuple(
            FrameRecord(
                frame_id=pos,
                vision_feat=[float(g) + noise * rng.standard_normal()],
                text_feat=[float(g) * 0.5 + noise * rng.standard_normal()],
                start_ms=(int(g) - 1) * 1000,
                end_ms=(int(g) - 1) * 1000 + 900,
                shot_id=1 + (int(g) > n_frames // 2),
                scene_id=1,
                gt_index=int(g),
            )
            for pos, g in enumerate(gt)
        )
        clips.append(ClipPuzzle(f"mono-{c}", f"m{c // 5}", frames))
    return clips


def test_train_learns_separable_monotone_features():
    tr = monotone_clips(40, seed=0)
    te = monotone_clips(15, seed=99)
    cfg = ModelConfig(d_v=1, d_u=1, hidden_dim=32, proj_dim=8, n_negatives=2,
                      lr=1e-3, epochs=5, pairs_per_clip=10, seed=3)
    params, trace = train(tr, cfg)
    assert pairwise_accuracy(params, te, "frame") > 0.95
    by_epoch = {}
    for row in trace:
        by_epoch.setdefault(row.epoch, []).append(row.loss_total)
    means = [np.mean(v) for _, v in sorted(by_epoch.items())]
    assert means[-1] < means[0]


def test_untrained_accuracy_near_chance():
    te = monotone_clips(15, seed=7)
    params = init_params(ModelConfig(d_v=1, d_u=1, hidden_dim=32, proj_dim=8, seed=11))
    acc = pairwise_accuracy(params, te, "frame")
    assert 0.4 <= acc <= 0.6


# --- checkpoints ---


def test_checkpoint_round_trip(tmp_path):
    clips = structured_clips(2)
    cfg = small_config(d_v=8, d_u=4, hidden_dim=16, epochs=1, pairs_per_clip=3)
    params, _ = train(clips, cfg)
    path = tmp_path / "ckpt.bin"
    save_checkpoint(path, params)
    loaded = load_checkpoint(path)
    assert np.array_equal(pack_params(params), pack_params(loaded))
    assert loaded.step_count == params.step_count
    # optimizer state survives
    for (_, net_a), (_, net_b) in zip(params.networks(), loaded.networks()):
        for arr_a, arr_b in zip(net_a.arrays(), net_b.arrays()):
            ma, va, ta = params.opt.state_for(arr_a)
            mb, vb, tb = loaded.opt.state_for(arr_b)
            assert ta == tb
            assert np.array_equal(ma, mb) and np.array_equal(va, vb)


def test_checkpoint_bytes_deterministic(tmp_path):
    params = init_params(small_config())
    p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
    save_checkpoint(p1, params)
    save_checkpoint(p2, params)
    assert p1.read_bytes() == p2.read_bytes()


def test_shared_heads_mode():
    cfg = small_config(share_heads=True)
    params = init_params(cfg)
    assert params.phi("frame") is params.phi("scene")
    assert len(params.networks()) == 2
