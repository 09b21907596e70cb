"""Trainable pairwise order classifier and contrastive projection head.

For each hierarchy level (frame, shot, scene) the model holds two small
feed-forward networks over flat feature vectors:

* ``phi`` -- binary order classifier. It consumes the concatenation of two
  same-level representations and emits 2 logits; index 1 is the class
  "first item temporally precedes the second", index 0 the reverse.
* ``psi`` -- projection head used for clustering. It emits an L2-normalized
  embedding; training attracts sampled positives and repels negatives drawn
  from other structural groups.

The combined objective is ``loss_cls + lambda * loss_cl``. Gradients are
written out by hand (see nn.py) and optimized with AdamW. Levels get their
own heads by default; ``share_heads`` collapses them into one pair.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .nn import AdamW, Mlp, flatten_arrays, xavier_mlp
from .types import ClipPuzzle, Hierarchy, hierarchy_from_labels, validate_clip
from .util import derive_seed, rng_for

LEVELS = ("frame", "shot", "scene")


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class ModelConfig:
    d_v: int
    d_u: int
    hidden_dim: int = 512
    proj_dim: int = 64
    lambda_: float = 0.75
    n_negatives: int = 8
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-6
    weight_decay: float = 0.01
    batch_size: int = 8
    epochs: int = 5
    pairs_per_clip: int = 12
    share_heads: bool = False
    seed: int = 0

    def validate(self) -> None:
        if min(self.d_v, self.d_u, self.hidden_dim, self.proj_dim) < 1:
            raise ValueError("all dimensions must be positive")
        if self.lambda_ < 0:
            raise ValueError("lambda_ must be >= 0")
        if self.n_negatives < 1:
            raise ValueError("n_negatives must be >= 1")
        if self.batch_size < 1 or self.epochs < 0 or self.pairs_per_clip < 1:
            raise ValueError("invalid batch_size/epochs/pairs_per_clip")

    @property
    def input_dim(self) -> int:
        return self.d_v + self.d_u


class ModelParams:
    """Per-level phi/psi networks plus optimizer state."""

    def __init__(
        self,
        config: ModelConfig,
        phi_heads: dict[str, Mlp],
        psi_heads: dict[str, Mlp],
        opt: AdamW | None = None,
        step_count: int = 0,
    ):
        self.config = config
        self.phi_heads = phi_heads
        self.psi_heads = psi_heads
        self.opt = opt
        self.step_count = step_count

    def _key(self, level: str) -> str:
        if level not in LEVELS:
            raise ValueError(f"unknown level {level!r}")
        return "shared" if self.config.share_heads else level

    def phi(self, level: str) -> Mlp:
        return self.phi_heads[self._key(level)]

    def psi(self, level: str) -> Mlp:
        return self.psi_heads[self._key(level)]

    def networks(self) -> list[tuple[str, Mlp]]:
        """Unique networks in canonical (checkpoint/packing) order."""
        keys = ("shared",) if self.config.share_heads else LEVELS
        out = [(f"phi/{k}", self.phi_heads[k]) for k in keys]
        out += [(f"psi/{k}", self.psi_heads[k]) for k in keys]
        return out

    def all_arrays(self) -> list[np.ndarray]:
        return [a for _, net in self.networks() for a in net.arrays()]

    def copy(self) -> "ModelParams":
        keys = ("shared",) if self.config.share_heads else LEVELS
        return ModelParams(
            self.config,
            {k: self.phi_heads[k].copy() for k in keys},
            {k: self.psi_heads[k].copy() for k in keys},
            opt=None,
            step_count=self.step_count,
        )


def init_params(config: ModelConfig) -> ModelParams:
    config.validate()
    rng = rng_for(config.seed, "init")
    d = config.input_dim
    h = config.hidden_dim
    keys = ("shared",) if config.share_heads else LEVELS
    phi = {k: xavier_mlp([2 * d, h, h, 2], rng, hidden_bias=0.01) for k in keys}
    psi = {k: xavier_mlp([d, h, h, config.proj_dim], rng, hidden_bias=0.01) for k in keys}
    return ModelParams(config, phi, psi)


def encode_frame(vision_feat, text_feat, config: ModelConfig | None = None) -> np.ndarray:
    """Frame representation: concatenation of vision and text features."""
    v = np.asarray(vision_feat, dtype=np.float64)
    u = np.asarray(text_feat, dtype=np.float64)
    if v.ndim != 1 or u.ndim != 1:
        raise ValueError("feature vectors must be 1-D")
    if config is not None and (v.size != config.d_v or u.size != config.d_u):
        raise ValueError(
            f"feature dims ({v.size}, {u.size}) do not match config ({config.d_v}, {config.d_u})"
        )
    return np.concatenate([v, u])


def pool_group(members: Sequence[np.ndarray]) -> np.ndarray:
    """Order-invariant group representation: element-wise mean of members."""
    if len(members) == 0:
        raise ValueError("cannot pool an empty group")
    stack = np.asarray(members, dtype=np.float64)
    if stack.ndim != 2:
        raise ValueError("members must share one dimensionality")
    return stack.mean(axis=0)


def frame_matrix(clip: ClipPuzzle) -> np.ndarray:
    """(N, d_v + d_u) matrix of frame representations in presentation order."""
    return np.stack([encode_frame(f.vision_feat, f.text_feat) for f in clip.frames])


@dataclass
class LevelItems:
    """Same-level representations of one clip, with temporal keys and groups.

    ``keys`` order the items temporally (min gt_index over member frames);
    ``groups`` identify each item's structural group for negative sampling;
    ``members`` lists the presentation positions each item covers.
    """

    reps: np.ndarray
    keys: np.ndarray
    groups: list[tuple]
    members: list[list[int]]


def level_representations(clip: ClipPuzzle, hierarchy: Hierarchy | None = None) -> dict[str, LevelItems]:
    h = hierarchy if hierarchy is not None else hierarchy_from_labels(clip)
    frames = frame_matrix(clip)
    gt = np.array([f.gt_index for f in clip.frames], dtype=np.int64)

    frame_items = LevelItems(
        reps=frames,
        keys=gt,
        groups=[(clip.clip_id, f.scene_id, f.shot_id) for f in clip.frames],
        members=[[p] for p in range(clip.n_frames)],
    )

    shot_reps, shot_keys, shot_groups, shot_members = [], [], [], []
    scene_shot_reps: list[list[np.ndarray]] = []
    for scene in h.scenes:
        per_scene = []
        for shot in scene.shots:
            positions = list(shot.frame_positions)
            rep = pool_group(frames[positions])
            per_scene.append(rep)
            shot_reps.append(rep)
            shot_keys.append(int(gt[positions].min()))
            shot_groups.append((clip.clip_id, scene.scene_key))
            shot_members.append(positions)
        scene_shot_reps.append(per_scene)
    shot_items = LevelItems(np.stack(shot_reps), np.array(shot_keys), shot_groups, shot_members)

    scene_reps, scene_keys, scene_groups, scene_members = [], [], [], []
    for scene, reps in zip(h.scenes, scene_shot_reps):
        positions = [p for shot in scene.shots for p in shot.frame_positions]
        scene_reps.append(pool_group(reps))
        scene_keys.append(int(gt[positions].min()))
        scene_groups.append((clip.clip_id,))
        scene_members.append(positions)
    scene_items = LevelItems(np.stack(scene_reps), np.array(scene_keys), scene_groups, scene_members)

    return {"frame": frame_items, "shot": shot_items, "scene": scene_items}


# ---------------------------------------------------------------------------
# forward passes


def phi_forward_batch(params: ModelParams, a: np.ndarray, b: np.ndarray, level: str = "frame") -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape != b.shape:
        raise ValueError("pair inputs must share a shape")
    logits, _ = params.phi(level).forward(np.concatenate([a, b], axis=1))
    if not np.all(np.isfinite(logits)):
        raise FloatingPointError("non-finite logits in order classifier")
    return logits


def phi_forward(params: ModelParams, a, b, level: str = "frame") -> np.ndarray:
    """Order logits for one pair; index 1 = 'a precedes b', index 0 = reverse."""
    return phi_forward_batch(params, a, b, level)[0]


def _psi_raw(params: ModelParams, x: np.ndarray, level: str):
    raw, cache = params.psi(level).forward(np.atleast_2d(np.asarray(x, dtype=np.float64)))
    if not np.all(np.isfinite(raw)):
        raise FloatingPointError("non-finite activations in projection head")
    norms = np.linalg.norm(raw, axis=1)
    if np.any(norms < 1e-12):
        raise ValueError("projection collapsed to a zero vector before normalization")
    return raw, norms, cache


def psi_forward_batch(params: ModelParams, x: np.ndarray, level: str = "frame") -> np.ndarray:
    raw, norms, _ = _psi_raw(params, x, level)
    return raw / norms[:, None]


def psi_forward(params: ModelParams, x, level: str = "frame") -> np.ndarray:
    """Unit-norm projection of one representation."""
    return psi_forward_batch(params, x, level)[0]


# ---------------------------------------------------------------------------
# losses


def loss_cls(logits, order_label: int) -> float:
    """Softmax cross-entropy of 2 logits against the true order class."""
    if order_label not in (0, 1):
        raise ValueError("order_label must be 0 or 1")
    z = np.asarray(logits, dtype=np.float64)
    m = z.max()
    lse = m + np.log(np.exp(z - m).sum())
    return float(lse - z[order_label])


def loss_cl(anchor_emb, pos_emb, neg_embs) -> float:
    """Contrastive loss: -log softmax of the positive similarity.

    Inputs are already-projected embeddings; similarities are plain dot
    products.
    """
    a = np.asarray(anchor_emb, dtype=np.float64)
    p = np.asarray(pos_emb, dtype=np.float64)
    q = np.atleast_2d(np.asarray(neg_embs, dtype=np.float64))
    if q.shape[0] == 0:
        raise ValueError("at least one negative is required")
    sims = np.concatenate([[a @ p], q @ a])
    m = sims.max()
    lse = m + np.log(np.exp(sims - m).sum())
    return float(lse - sims[0])


@dataclass
class TrainingPair:
    """One ordered same-level pair with its sampled negatives."""

    a: np.ndarray
    b: np.ndarray
    order_label: int
    negatives: np.ndarray
    level: str = "frame"


def _batch_stats(pairs: Sequence[TrainingPair], params: ModelParams, lambda_: float, with_grads: bool):
    """Mean losses over a same-level batch, optionally with gradients.

    Gradients are for the batch-mean of ``loss_cls + lambda * loss_cl`` and
    are keyed by network name as in ``ModelParams.networks()``.
    """
    level = pairs[0].level
    if any(p.level != level for p in pairs):
        raise ValueError("a batch must contain a single level")
    n_pairs = len(pairs)
    a = np.stack([p.a for p in pairs])
    b = np.stack([p.b for p in pairs])
    labels = np.array([p.order_label for p in pairs], dtype=np.int64)

    phi_net = params.phi(level)
    logits, phi_cache = phi_net.forward(np.concatenate([a, b], axis=1))
    m = logits.max(axis=1, keepdims=True)
    lse = m + np.log(np.exp(logits - m).sum(axis=1, keepdims=True))
    cls_losses = (lse[:, 0] - logits[np.arange(n_pairs), labels])
    mean_cls = float(cls_losses.mean())

    negs = np.stack([p.negatives for p in pairs])  # (B, n, D)
    n_neg = negs.shape[1]
    rows = np.concatenate([a, b, negs.reshape(n_pairs * n_neg, -1)], axis=0)
    raw, norms, psi_cache = _psi_raw(params, rows, level)
    emb = raw / norms[:, None]
    e_a = emb[:n_pairs]
    e_p = emb[n_pairs : 2 * n_pairs]
    e_q = emb[2 * n_pairs :].reshape(n_pairs, n_neg, -1)
    s0 = np.einsum("bd,bd->b", e_a, e_p)
    sk = np.einsum("bd,bnd->bn", e_a, e_q)
    sims = np.concatenate([s0[:, None], sk], axis=1)
    sm = sims.max(axis=1, keepdims=True)
    sim_lse = sm + np.log(np.exp(sims - sm).sum(axis=1, keepdims=True))
    cl_losses = sim_lse[:, 0] - s0
    mean_cl = float(cl_losses.mean())
    total = mean_cls + lambda_ * mean_cl

    if not with_grads:
        return mean_cls, mean_cl, total, None

    grads: dict[str, tuple[list, list]] = {}
    key = params._key(level)

    d_logits = np.exp(logits - lse)  # softmax over the 2 logits
    d_logits[np.arange(n_pairs), labels] -= 1.0
    d_logits /= n_pairs
    gw, gb, _ = phi_net.backward(phi_cache, d_logits)
    grads[f"phi/{key}"] = (gw, gb)

    if lambda_ != 0.0:
        w = np.exp(sims - sim_lse)  # (B, n+1) softmax over similarities
        scale = lambda_ / n_pairs
        d_ea = ((w[:, 0] - 1.0)[:, None] * e_p + np.einsum("bn,bnd->bd", w[:, 1:], e_q)) * scale
        d_ep = (w[:, 0] - 1.0)[:, None] * e_a * scale
        d_eq = (w[:, 1:, None] * e_a[:, None, :]) * scale
        d_emb = np.concatenate([d_ea, d_ep, d_eq.reshape(n_pairs * n_neg, -1)], axis=0)
        d_raw = (d_emb - emb * np.einsum("rd,rd->r", emb, d_emb)[:, None]) / norms[:, None]
        gw, gb, _ = params.psi(level).backward(psi_cache, d_raw)
        grads[f"psi/{key}"] = (gw, gb)

    return mean_cls, mean_cl, total, grads


def loss_parts(pair: TrainingPair, params: ModelParams, lambda_: float) -> tuple[float, float, float]:
    cls, cl, total, _ = _batch_stats([pair], params, lambda_, with_grads=False)
    return cls, cl, total


def loss_total(pair: TrainingPair, params: ModelParams, lambda_: float) -> float:
    return loss_parts(pair, params, lambda_)[2]


def backward(pair: TrainingPair, params: ModelParams, lambda_: float) -> dict[str, tuple[list, list]]:
    """Analytic gradients of loss_total for one pair, keyed by network name.

    Networks not touched by the pair's level have identically zero gradient
    and are omitted.
    """
    _, _, total, grads = _batch_stats([pair], params, lambda_, with_grads=True)
    if not np.isfinite(total):
        raise TrainingDivergedError("non-finite loss")
    for gw, gb in grads.values():
        for g in gw + gb:
            if not np.all(np.isfinite(g)):
                raise TrainingDivergedError("non-finite gradient")
    return grads


def grad_vector(pair: TrainingPair, params: ModelParams, lambda_: float) -> np.ndarray:
    """Gradients flattened in ``pack_params`` order (zeros for untouched nets)."""
    grads = backward(pair, params, lambda_)
    chunks = []
    for name, net in params.networks():
        if name in grads:
            gw, gb = grads[name]
            pieces = []
            for w, b in zip(gw, gb):
                pieces.append(w)
                pieces.append(b)
            chunks.append(flatten_arrays(pieces))
        else:
            chunks.append(np.zeros(sum(arr.size for arr in net.arrays())))
    return np.concatenate(chunks)


def pack_params(params: ModelParams) -> np.ndarray:
    return flatten_arrays(params.all_arrays())


def set_params_vector(params: ModelParams, vec: np.ndarray) -> None:
    offset = 0
    for arr in params.all_arrays():
        arr[...] = vec[offset : offset + arr.size].reshape(arr.shape)
        offset += arr.size
    if offset != vec.size:
        raise ValueError("vector size does not match parameter count")


# ---------------------------------------------------------------------------
# pair sampling and training


@dataclass
class SampledPairs:
    pairs: list[TrainingPair]
    skipped_clips: int


def _sample_negatives(rng, pool: np.ndarray, group_ids: np.ndarray, anchor_gid: int, n: int) -> np.ndarray:
    eligible = np.flatnonzero(group_ids != anchor_gid)
    if eligible.size == 0:
        # degenerate dataset: fall back to the whole pool
        eligible = np.arange(pool.shape[0])
    if eligible.size <= n:
        picks = eligible[rng.integers(0, eligible.size, size=n)]
    else:
        chosen: list[int] = []
        seen = set()
        while len(chosen) < n:
            idx = int(rng.integers(0, pool.shape[0]))
            if group_ids[idx] != anchor_gid and idx not in seen:
                seen.add(idx)
                chosen.append(idx)
        picks = np.array(chosen)
    return pool[picks]


def sample_pairs(clips: Sequence[ClipPuzzle], config: ModelConfig, level: str, rng_seed: int) -> SampledPairs:
    """Ordered same-level training pairs with negatives from other groups.

    Every selected unordered pair is emitted twice, once per orientation with
    complementary labels (temporal-reversal augmentation), so the label
    distribution is balanced by construction. Negatives never share the
    anchor's group: other shots for frame-level anchors, other scenes for
    shot-level, other clips for scene-level. Deterministic given the seed.
    """
    if level not in LEVELS:
        raise ValueError(f"unknown level {level!r}")
    rng = np.random.default_rng(rng_seed)
    per_clip = [level_representations(c)[level] for c in clips]

    group_index: dict[tuple, int] = {}
    pool_rows, pool_gids = [], []
    for items in per_clip:
        for rep, group in zip(items.reps, items.groups):
            pool_rows.append(rep)
            pool_gids.append(group_index.setdefault(group, len(group_index)))
    pool = np.stack(pool_rows)
    gids = np.array(pool_gids, dtype=np.int64)

    pairs: list[TrainingPair] = []
    skipped = 0
    for items in per_clip:
        n = items.reps.shape[0]
        if n < 2:
            skipped += 1
            continue
        index_pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        if len(index_pairs) > config.pairs_per_clip:
            chosen = rng.choice(len(index_pairs), size=config.pairs_per_clip, replace=False)
            index_pairs = [index_pairs[k] for k in chosen]
        for i, j in index_pairs:
            forward = 1 if items.keys[i] < items.keys[j] else 0
            for ai, bi, label in ((i, j, forward), (j, i, 1 - forward)):
                anchor_gid = group_index[items.groups[ai]]
                negs = _sample_negatives(rng, pool, gids, anchor_gid, config.n_negatives)
                pairs.append(
                    TrainingPair(
                        a=items.reps[ai],
                        b=items.reps[bi],
                        order_label=label,
                        negatives=negs,
                        level=level,
                    )
                )
    rng.shuffle(pairs)
    return SampledPairs(pairs, skipped)


@dataclass(frozen=True)
class TraceRow:
    epoch: int
    step: int
    loss_cls: float
    loss_cl: float
    loss_total: float


def write_loss_trace(path, rows: Iterable[TraceRow]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch,step,loss_cls,loss_cl,loss_total\n")
        for r in rows:
            fh.write(f"{r.epoch},{r.step},{r.loss_cls:.10g},{r.loss_cl:.10g},{r.loss_total:.10g}\n")


def train(clips: Sequence[ClipPuzzle], config: ModelConfig) -> tuple[ModelParams, list[TraceRow]]:
    """AdamW training over sampled pairs at all three levels jointly."""
    config.validate()
    if not clips:
        raise ValueError("empty training set")
    for clip in clips:
        report = validate_clip(clip)
        if not report:
            raise ValueError(f"invalid clip {clip.clip_id}: {report.problem}")
    first = clips[0].frames[0]
    if first.vision_feat.size != config.d_v or first.text_feat.size != config.d_u:
        raise ValueError("clip feature dims do not match the model config")

    params = init_params(config)
    opt = AdamW(config.lr, config.beta1, config.beta2, config.eps, config.weight_decay)
    params.opt = opt
    trace: list[TraceRow] = []
    step = 0

    for epoch in range(config.epochs):
        stream: list[TrainingPair] = []
        for level in LEVELS:
            sampled = sample_pairs(clips, config, level, derive_seed(config.seed, f"pairs/{level}/epoch{epoch}"))
            stream.extend(sampled.pairs)
        rng_for(config.seed, f"shuffle/epoch{epoch}").shuffle(stream)

        buckets: dict[str, list[TrainingPair]] = {lv: [] for lv in LEVELS}

        def flush(level: str) -> None:
            nonlocal step
            batch = buckets[level]
            if not batch:
                return
            try:
                cls, cl, total, grads = _batch_stats(batch, params, config.lambda_, with_grads=True)
            except (FloatingPointError, ValueError) as exc:
                raise TrainingDivergedError(f"training diverged at step {step}: {exc}") from exc
            if not np.isfinite(total):
                raise TrainingDivergedError(f"non-finite loss at step {step}")
            for name, net in params.networks():
                if name not in grads:
                    continue
                gw, gb = grads[name]
                flat_grads = []
                for w, b in zip(gw, gb):
                    flat_grads.append(w)
                    flat_grads.append(b)
                opt.step(net.arrays(), flat_grads)
            trace.append(TraceRow(epoch, step, cls, cl, total))
            step += 1
            params.step_count = step
            buckets[level] = []

        for pair in stream:
            buckets[pair.level].append(pair)
            if len(buckets[pair.level]) == config.batch_size:
                flush(pair.level)
        for level in LEVELS:
            flush(level)

    return params, trace


def pairwise_accuracy(params: ModelParams, clips: Sequence[ClipPuzzle], level: str = "frame") -> float:
    """Order-classification accuracy over all ordered same-level pairs."""
    correct = 0
    total = 0
    for clip in clips:
        items = level_representations(clip)[level]
        n = items.reps.shape[0]
        if n < 2:
            continue
        ii, jj = np.where(~np.eye(n, dtype=bool))
        logits = phi_forward_batch(params, items.reps[ii], items.reps[jj], level)
        preds = logits.argmax(axis=1)
        labels = (items.keys[ii] < items.keys[jj]).astype(np.int64)
        correct += int((preds == labels).sum())
        total += preds.size
    if total == 0:
        raise ValueError("no pairs available")
    return correct / total


# ---------------------------------------------------------------------------
# checkpoint serialization (deterministic byte layout)

_CHECKPOINT_FORMAT = "clipsort-checkpoint"
_CHECKPOINT_VERSION = 1


def save_checkpoint(path, params: ModelParams) -> None:
    """Header JSON line + little-endian float64 blob; byte-stable given params."""
    named = []
    for name, net in params.networks():
        for idx, arr in enumerate(net.arrays()):
            named.append((f"{name}/{idx}", arr))
    opt_steps = None
    opt_blocks: list[np.ndarray] = []
    if params.opt is not None:
        opt_steps = []
        for _, arr in named:
            m, v, t = params.opt.state_for(arr)
            opt_blocks.append(m)
            opt_blocks.append(v)
            opt_steps.append(t)
    header = {
        "format": _CHECKPOINT_FORMAT,
        "version": _CHECKPOINT_VERSION,
        "config": asdict(params.config),
        "step_count": params.step_count,
        "arrays": [{"name": n, "shape": list(a.shape)} for n, a in named],
        "opt_steps": opt_steps,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        for _, arr in named:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        for block in opt_blocks:
            fh.write(np.ascontiguousarray(block, dtype="<f8").tobytes())


def load_checkpoint(path) -> ModelParams:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        blob = fh.read()
    header = json.loads(header_line.decode("utf-8"))
    if header.get("format") != _CHECKPOINT_FORMAT or header.get("version") != _CHECKPOINT_VERSION:
        raise ValueError(f"not a recognized checkpoint: {path}")
    config = ModelConfig(**header["config"])
    params = init_params(config)
    params.step_count = int(header["step_count"])

    named = []
    for name, net in params.networks():
        for idx, arr in enumerate(net.arrays()):
            named.append((f"{name}/{idx}", arr))
    if [n for n, _ in named] != [a["name"] for a in header["arrays"]]:
        raise ValueError("checkpoint array layout does not match config")

    offset = 0
    data = np.frombuffer(blob, dtype="<f8")
    for (_, arr), meta in zip(named, header["arrays"]):
        size = int(np.prod(meta["shape"])) if meta["shape"] else 1
        arr[...] = data[offset : offset + size].reshape(meta["shape"])
        offset += size
    if header["opt_steps"] is not None:
        opt = AdamW(config.lr, config.beta1, config.beta2, config.eps, config.weight_decay)
        for (_, arr), t in zip(named, header["opt_steps"]):
            m = data[offset : offset + arr.size].reshape(arr.shape).copy()
            offset += arr.size
            v = data[offset : offset + arr.size].reshape(arr.shape).copy()
            offset += arr.size
            opt.load_state(arr, m, v, t)
        params.opt = opt
    if offset != data.size:
        raise ValueError("checkpoint payload size mismatch")
    return params
