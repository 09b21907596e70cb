"""Domain types for clip reordering: frames, clips, hierarchies, permutations.

A clip is a (possibly shuffled) sequence of frames. Each frame carries
precomputed vision/text feature vectors, millisecond timestamps, structural
shot/scene labels, and a 1-based ground-truth temporal index. Presentation
positions (indices into ``ClipPuzzle.frames``) are 0-based throughout; a
``Permutation`` is an integer vector where ``mapping[p]`` is the presentation
index of the item placed at temporal position ``p``.

Clips serialize to JSONL, one object per line:
``{clip_id, movie_id, frames: [{frame_id, vision_feat, text_feat, start_ms,
end_ms, shot_id, scene_id, gt_index}]}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


def as_feature(values) -> np.ndarray:
    """Coerce to a read-only 1-D float64 feature vector; reject non-finite."""
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError(f"feature vector must be non-empty and 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("feature vector contains non-finite entries")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class FrameRecord:
    """One frame: features, time span, structural labels, hidden true index."""

    frame_id: int
    vision_feat: np.ndarray
    text_feat: np.ndarray
    start_ms: int
    end_ms: int
    shot_id: int
    scene_id: int
    gt_index: int

    def __post_init__(self):
        object.__setattr__(self, "vision_feat", as_feature(self.vision_feat))
        object.__setattr__(self, "text_feat", as_feature(self.text_feat))

    @property
    def paired(self) -> bool:
        """True when the frame carries a nonzero utterance feature."""
        return bool(np.any(self.text_feat != 0.0))


@dataclass(frozen=True, eq=False)
class ClipPuzzle:
    """A clip in presentation (shuffled) order; the unit of work."""

    clip_id: str
    movie_id: str
    frames: tuple[FrameRecord, ...]

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))

    @property
    def n_frames(self) -> int:
        return len(self.frames)


@dataclass(frozen=True)
class Shot:
    shot_key: int
    frame_positions: tuple[int, ...]


@dataclass(frozen=True)
class Scene:
    scene_key: int
    shots: tuple[Shot, ...]


@dataclass(frozen=True)
class Hierarchy:
    """Scene -> shot -> frame-position grouping of one clip."""

    scenes: tuple[Scene, ...]

    @property
    def n_scenes(self) -> int:
        return len(self.scenes)

    @property
    def n_shots(self) -> int:
        return sum(len(sc.shots) for sc in self.scenes)

    def scene_partition(self) -> list[list[int]]:
        return [[p for sh in sc.shots for p in sh.frame_positions] for sc in self.scenes]

    def shot_partition(self) -> list[list[int]]:
        return [list(sh.frame_positions) for sc in self.scenes for sh in sc.shots]

    def shots_per_scene(self) -> list[int]:
        return [len(sc.shots) for sc in self.scenes]


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    problem: str = ""

    def __bool__(self) -> bool:
        return self.ok


def validate_clip(clip: ClipPuzzle) -> ValidationResult:
    """Check every clip/frame invariant; report the first violation found."""
    n = clip.n_frames
    if n < 1:
        return ValidationResult(False, "clip has no frames")
    dim_v = clip.frames[0].vision_feat.size
    dim_u = clip.frames[0].text_feat.size
    for k, f in enumerate(clip.frames):
        if f.start_ms > f.end_ms:
            return ValidationResult(False, f"frame {k}: start_ms > end_ms")
        if f.vision_feat.size != dim_v or f.text_feat.size != dim_u:
            return ValidationResult(False, f"frame {k}: inconsistent feature dims")
    indices = sorted(f.gt_index for f in clip.frames)
    if indices != list(range(1, n + 1)):
        return ValidationResult(False, "gt_index not a bijection")
    scene_of_shot: dict[int, int] = {}
    for f in clip.frames:
        seen = scene_of_shot.setdefault(f.shot_id, f.scene_id)
        if seen != f.scene_id:
            return ValidationResult(False, "shot crosses scenes")
    return ValidationResult(True)


def is_permutation(mapping) -> bool:
    arr = np.asarray(mapping, dtype=np.int64)
    return arr.ndim == 1 and arr.size >= 1 and np.array_equal(np.sort(arr), np.arange(arr.size))


def check_permutation(mapping) -> np.ndarray:
    arr = np.asarray(mapping, dtype=np.int64)
    if not is_permutation(arr):
        raise ValueError("mapping is not a permutation of 0..N-1")
    return arr


def invert_permutation(mapping) -> np.ndarray:
    """Inverse mapping: position of each item (``inv[item] = position``)."""
    arr = check_permutation(mapping)
    inv = np.empty_like(arr)
    inv[arr] = np.arange(arr.size)
    return inv


def ground_truth_permutation(clip: ClipPuzzle) -> np.ndarray:
    """Permutation that sorts presentation positions by gt_index ascending."""
    report = validate_clip(clip)
    if not report:
        raise ValueError(f"invalid clip {clip.clip_id}: {report.problem}")
    return np.argsort([f.gt_index for f in clip.frames], kind="stable").astype(np.int64)


def permute_clip(clip: ClipPuzzle, mapping) -> ClipPuzzle:
    """New clip whose presentation order is ``frames[mapping[p]]``."""
    arr = check_permutation(mapping)
    if arr.size != clip.n_frames:
        raise ValueError("permutation length does not match clip")
    return ClipPuzzle(clip.clip_id, clip.movie_id, tuple(clip.frames[i] for i in arr))


def hierarchy_from_labels(clip: ClipPuzzle) -> Hierarchy:
    """Group presentation positions by (scene_id, shot_id), first-occurrence order."""
    scene_order: list[int] = []
    shots_by_scene: dict[int, dict[int, list[int]]] = {}
    for pos, f in enumerate(clip.frames):
        if f.scene_id not in shots_by_scene:
            shots_by_scene[f.scene_id] = {}
            scene_order.append(f.scene_id)
        shots = shots_by_scene[f.scene_id]
        shots.setdefault(f.shot_id, []).append(pos)
    scenes = tuple(
        Scene(sid, tuple(Shot(shot_id, tuple(ps)) for shot_id, ps in shots_by_scene[sid].items()))
        for sid in scene_order
    )
    return Hierarchy(scenes)


def clip_to_dict(clip: ClipPuzzle) -> dict:
    return {
        "clip_id": clip.clip_id,
        "movie_id": clip.movie_id,
        "frames": [
            {
                "frame_id": f.frame_id,
                "vision_feat": f.vision_feat.tolist(),
                "text_feat": f.text_feat.tolist(),
                "start_ms": f.start_ms,
                "end_ms": f.end_ms,
                "shot_id": f.shot_id,
                "scene_id": f.scene_id,
                "gt_index": f.gt_index,
            }
            for f in clip.frames
        ],
    }


def clip_from_dict(obj: dict) -> ClipPuzzle:
    frames = tuple(
        FrameRecord(
            frame_id=int(d["frame_id"]),
            vision_feat=d["vision_feat"],
            text_feat=d["text_feat"],
            start_ms=int(d["start_ms"]),
            end_ms=int(d["end_ms"]),
            shot_id=int(d["shot_id"]),
            scene_id=int(d["scene_id"]),
            gt_index=int(d["gt_index"]),
        )
        for d in obj["frames"]
    )
    return ClipPuzzle(str(obj["clip_id"]), str(obj["movie_id"]), frames)


def write_clips_jsonl(path, clips: Iterable[ClipPuzzle]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for clip in clips:
            fh.write(json.dumps(clip_to_dict(clip)) + "\n")


def read_clips_jsonl(path) -> list[ClipPuzzle]:
    clips = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                clips.append(clip_from_dict(json.loads(line)))
    return clips
