"""Deterministic synthetic-clip generator with hierarchical structure.

Scene centers sit on mutually orthogonal directions scaled by ``scene_sep``
and shot centers branch off on further orthogonal directions scaled by
``shot_sep``, so group separations hold by construction whenever the vision
dimension is large enough. Temporal order is injected as a linear drift
along one more orthogonal unit direction: with zero noise, projecting
features onto the drift direction recovers the ground-truth order exactly.
Text features follow vision through a fixed random linear map and are
zeroed for the unpaired fraction of frames.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .types import ClipPuzzle, FrameRecord, Hierarchy, hierarchy_from_labels, permute_clip, write_clips_jsonl
from .util import derive_seed

SPLIT_NAMES = ("train", "val", "test_in", "test_out")
DEFAULT_RATIOS = (0.70, 0.06, 0.12, 0.12)


@dataclass(frozen=True)
class GenConfig:
    n_scenes: int = 2
    shots_per_scene: int = 3
    frames_per_shot: int = 3
    d_v: int = 16
    d_u: int = 8
    scene_sep: float = 6.0
    shot_sep: float = 3.0
    drift: float = 0.5
    noise: float = 0.25
    pair_rate: float = 0.85
    seed: int = 0  # per-clip content (centers, noise, pairing)
    space_seed: int = 0  # shared feature-space geometry (drift direction, text map)

    def __post_init__(self):
        if min(self.n_scenes, self.shots_per_scene, self.frames_per_shot) < 1:
            raise ValueError("all structure counts must be >= 1")
        if min(self.d_v, self.d_u) < 1:
            raise ValueError("feature dims must be >= 1")
        if self.scene_sep <= 0 or self.shot_sep <= 0:
            raise ValueError("separations must be positive")
        if not 0.0 <= self.pair_rate <= 1.0:
            raise ValueError("pair_rate must lie in [0, 1]")
        if self.noise < 0 or self.drift < 0:
            raise ValueError("noise and drift must be non-negative")

    @property
    def n_shots(self) -> int:
        return self.n_scenes * self.shots_per_scene

    @property
    def n_frames(self) -> int:
        return self.n_shots * self.frames_per_shot

    @property
    def directions_needed(self) -> int:
        return self.n_scenes + self.n_shots + 1


def _orthonormal(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Seeded random orthonormal basis with a deterministic sign convention."""
    mat = rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(mat)
    return q * np.sign(np.diag(r))


def generate_clip(cfg: GenConfig, clip_id: str | None = None, movie_id: str = "movie-0") -> tuple[ClipPuzzle, Hierarchy]:
    """One temporally ordered clip plus its ground-truth hierarchy.

    The drift direction and vision-to-text map are properties of the shared
    feature space (``space_seed``), so temporal order is learnable across
    clips; scene and shot centers are clip-specific and live in the
    orthogonal complement of the drift direction.
    """
    if cfg.d_v < cfg.directions_needed:
        raise ValueError(
            f"d_v={cfg.d_v} too small for {cfg.n_scenes} scenes x {cfg.shots_per_scene} shots"
            f" (needs >= {cfg.directions_needed} orthogonal directions)"
        )
    space_rng = np.random.default_rng(derive_seed(cfg.space_seed, "space"))
    basis = _orthonormal(space_rng, cfg.d_v)
    drift_dir = basis[:, cfg.d_v - 1]
    text_map = space_rng.standard_normal((cfg.d_u, cfg.d_v)) / np.sqrt(cfg.d_v)

    rng = np.random.default_rng(cfg.seed)
    sub = _orthonormal(rng, cfg.d_v - 1)
    dirs = basis[:, : cfg.d_v - 1] @ sub
    scene_dirs = dirs[:, : cfg.n_scenes].T
    shot_dirs = dirs[:, cfg.n_scenes : cfg.n_scenes + cfg.n_shots].T
    unpaired = rng.random(cfg.n_frames) >= cfg.pair_rate

    frames = []
    index = 0
    for s in range(cfg.n_scenes):
        scene_center = cfg.scene_sep * scene_dirs[s]
        for j in range(cfg.shots_per_scene):
            shot = s * cfg.shots_per_scene + j
            shot_center = scene_center + cfg.shot_sep * shot_dirs[shot]
            for _ in range(cfg.frames_per_shot):
                index += 1
                vision = shot_center + cfg.drift * index * drift_dir
                vision = vision + cfg.noise * rng.standard_normal(cfg.d_v)
                text = text_map @ vision + cfg.noise * rng.standard_normal(cfg.d_u)
                if unpaired[index - 1]:
                    text = np.zeros(cfg.d_u)
                frames.append(
                    FrameRecord(
                        frame_id=index,
                        vision_feat=vision,
                        text_feat=text,
                        start_ms=(index - 1) * 1000,
                        end_ms=(index - 1) * 1000 + 900,
                        shot_id=shot + 1,
                        scene_id=s + 1,
                        gt_index=index,
                    )
                )
    cid = clip_id if clip_id is not None else f"clip-{cfg.seed:08d}"
    clip = ClipPuzzle(cid, movie_id, tuple(frames))
    return clip, hierarchy_from_labels(clip)


def shuffle_clip(clip: ClipPuzzle, seed: int) -> ClipPuzzle:
    """Uniformly random presentation order; gt_index values untouched."""
    rng = np.random.default_rng(seed)
    return permute_clip(clip, rng.permutation(clip.n_frames))


def default_config_set(
    d_v: int = 16,
    d_u: int = 8,
    drift: float = 0.5,
    noise: float = 0.25,
    pair_rate: float = 0.85,
) -> tuple[GenConfig, ...]:
    """Structure mix spanning 10-20 frames: mostly 1-2 scenes, 2-6 shots."""
    shapes = [(1, 2, 5), (1, 2, 6), (1, 3, 4), (1, 3, 5), (2, 2, 3), (2, 2, 4), (2, 2, 5), (2, 3, 3)]
    return tuple(
        GenConfig(
            n_scenes=a,
            shots_per_scene=b,
            frames_per_shot=c,
            d_v=d_v,
            d_u=d_u,
            drift=drift,
            noise=noise,
            pair_rate=pair_rate,
        )
        for a, b, c in shapes
    )


def split_counts(n_clips: int, ratios: Sequence[float]) -> list[int]:
    """Exact split sizes by largest remainder; ratios must sum to 1."""
    if len(ratios) != len(SPLIT_NAMES):
        raise ValueError(f"expected {len(SPLIT_NAMES)} ratios")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("ratios must sum to 1")
    raw = [n_clips * r for r in ratios]
    counts = [int(x) for x in raw]
    remainders = sorted(range(len(raw)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in range(n_clips - sum(counts)):
        counts[remainders[i % len(raw)]] += 1
    return counts


def generate_dataset(
    configs: Sequence[GenConfig],
    n_clips: int,
    ratios: Sequence[float],
    seed: int,
    out_dir,
    clips_per_movie: int = 10,
) -> dict:
    """Generate shuffled clips, split them, and write one JSONL per split.

    The out-domain split draws from its own synthetic movies, disjoint from
    every other split's movie set. Returns the manifest (also written to
    ``manifest.json``).
    """
    if not configs:
        raise ValueError("need at least one generator config")
    if len({(c.d_v, c.d_u) for c in configs}) != 1:
        raise ValueError("all generator configs must share feature dims")
    if n_clips < 1:
        raise ValueError("n_clips must be >= 1")
    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)
    counts = split_counts(n_clips, ratios)
    rng = np.random.default_rng(derive_seed(seed, "dataset"))

    assignments = []
    for name, count in zip(SPLIT_NAMES, counts):
        assignments.extend([name] * count)
    # interleave so in-domain movies span train/val/test_in
    assignments = [assignments[i] for i in rng.permutation(len(assignments))]

    splits: dict[str, list[ClipPuzzle]] = {name: [] for name in SPLIT_NAMES}
    in_domain_ordinal = 0
    out_domain_ordinal = 0
    space_seed = derive_seed(seed, "space")
    for ordinal, split in enumerate(assignments):
        cfg = configs[int(rng.integers(len(configs)))]
        cfg = replace(cfg, seed=derive_seed(seed, f"clip/{ordinal}"), space_seed=space_seed)
        if split == "test_out":
            movie = f"movie-out-{out_domain_ordinal // clips_per_movie:04d}"
            out_domain_ordinal += 1
        else:
            movie = f"movie-in-{in_domain_ordinal // clips_per_movie:04d}"
            in_domain_ordinal += 1
        clip, _ = generate_clip(cfg, clip_id=f"clip-{ordinal:06d}", movie_id=movie)
        splits[split].append(shuffle_clip(clip, derive_seed(seed, f"shuffle/{ordinal}")))

    manifest = {
        "seed": seed,
        "n_clips": n_clips,
        "ratios": list(ratios),
        "clips_per_movie": clips_per_movie,
        "configs": [asdict(c) for c in configs],
        "splits": {},
    }
    for name in SPLIT_NAMES:
        path = out_path / f"{name}.jsonl"
        write_clips_jsonl(path, splits[name])
        manifest["splits"][name] = {
            "path": path.name,
            "n_clips": len(splits[name]),
            "movies": sorted({c.movie_id for c in splits[name]}),
        }
    with open(out_path / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
