"""Data curation: subtitle parsing, frame-utterance alignment, clip cutting.

The pipeline turns a SubRip subtitle file plus a frame manifest (timestamps,
precomputed vision features, shot/scene labels) into shuffled-ready clips:

1. ``parse_srt`` reads cues; ``normalize_utterance`` folds diacritics, strips
   markup, and drops sound cues / music lines / bare speaker labels.
2. ``align_frames`` pairs each frame with the cue whose time span covers it;
   when several frames fall inside one cue, only the middle frame survives
   as the representative. Uncovered frames are dropped unless keeping one
   avoids a long gap between kept frames.
3. ``segment_clips`` greedily cuts maximal windows of 10-20 frames whose
   paired fraction exceeds 80%.
4. ``split_dataset`` carves train/val/in-test splits with equally spaced
   clips per movie, and an out-domain test split from held-out movies.
"""

from __future__ import annotations

import csv
import re
import unicodedata
import warnings
from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .types import ClipPuzzle, FrameRecord
from .util import derive_seed

MIN_CLIP_FRAMES = 10
MAX_CLIP_FRAMES = 20
MIN_PAIRED_FRACTION = 0.8  # strict: a window at exactly 80% is rejected
DEFAULT_KEEP_GAP_MS = 5000
DEFAULT_TEXT_DIM = 32


class SrtParseError(ValueError):
    pass


@dataclass(frozen=True)
class SrtCue:
    index: int
    start_ms: int
    end_ms: int
    text: str


@dataclass(frozen=True)
class RawFrame:
    frame_id: int
    timestamp_ms: int
    feature: np.ndarray | str  # inline vector or a .npy path
    shot_id: int
    scene_id: int


@dataclass(frozen=True)
class AlignedFrame:
    frame: RawFrame
    cue: SrtCue | None
    paired: bool


_TIMING_RE = re.compile(
    r"^(\d{2}):(\d{2}):(\d{2})[,.](\d{3})\s*-->\s*(\d{2}):(\d{2}):(\d{2})[,.](\d{3})\s*$"
)


def _to_ms(h: str, m: str, s: str, ms: str) -> int:
    return ((int(h) * 60 + int(m)) * 60 + int(s)) * 1000 + int(ms)


def _ms_to_stamp(total: int) -> str:
    ms = total % 1000
    s = (total // 1000) % 60
    m = (total // 60_000) % 60
    h = total // 3_600_000
    return f"{h:02d}:{m:02d}:{s:02d},{ms:03d}"


def parse_srt(text: str) -> list[SrtCue]:
    """Parse SubRip text into cues, tolerating BOM, CRLF, and extra blanks.

    Cue text lines join with a single space. Malformed blocks raise
    ``SrtParseError`` naming the block; overlapping cues only warn.
    """
    body = text.lstrip("﻿").replace("\r\n", "\n").replace("\r", "\n")
    blocks = [b for b in re.split(r"\n\s*\n", body) if b.strip()]
    cues: list[SrtCue] = []
    for block_no, block in enumerate(blocks, start=1):
        lines = [ln.strip() for ln in block.split("\n") if ln.strip()]
        if len(lines) < 2:
            raise SrtParseError(f"block {block_no}: too few lines")
        if not lines[0].lstrip("-").isdigit():
            raise SrtParseError(f"block {block_no}: missing index line")
        index = int(lines[0])
        match = _TIMING_RE.match(lines[1])
        if not match:
            raise SrtParseError(f"block {block_no}: malformed timestamp line {lines[1]!r}")
        start = _to_ms(*match.groups()[:4])
        end = _to_ms(*match.groups()[4:])
        if end <= start:
            raise SrtParseError(f"block {block_no}: end before start")
        cues.append(SrtCue(index=index, start_ms=start, end_ms=end, text=" ".join(lines[2:])))
    for prev, cur in zip(cues, cues[1:]):
        if cur.start_ms < prev.end_ms:
            warnings.warn(f"overlapping cues {prev.index} and {cur.index}", stacklevel=2)
    return cues


def serialize_srt(cues: Sequence[SrtCue]) -> str:
    """Canonical SubRip text; ``parse_srt`` round-trips it byte for byte."""
    blocks = [
        f"{c.index}\n{_ms_to_stamp(c.start_ms)} --> {_ms_to_stamp(c.end_ms)}\n{c.text}\n"
        for c in cues
    ]
    return "\n".join(blocks)


_TAG_RE = re.compile(r"<[^>]*>|\{[^}]*\}")
_SPEAKER_RE = re.compile(r"^[A-Z][A-Z0-9 .,'\-]*:$")
_NOTES = "♪♫♬"  # musical note glyphs


def normalize_utterance(text: str) -> str | None:
    """Cleaned utterance text, or None when the cue should be dropped.

    Drops sound cues ([DOOR SLAMS], (sighs)), music-note-delimited lines,
    and bare all-caps speaker labels. Removes markup tags, folds diacritics
    to plain ASCII, and collapses whitespace.
    """
    stripped = _TAG_RE.sub(" ", text)
    collapsed = " ".join(stripped.split())
    if not collapsed:
        return None
    if collapsed[0] == "[" and collapsed[-1] == "]":
        return None
    if collapsed[0] == "(" and collapsed[-1] == ")":
        return None
    if collapsed[0] in _NOTES and collapsed[-1] in _NOTES:
        return None
    if _SPEAKER_RE.match(collapsed):
        return None
    decomposed = unicodedata.normalize("NFD", collapsed)
    folded = "".join(ch for ch in decomposed if not unicodedata.combining(ch))
    ascii_only = "".join(ch for ch in folded if ord(ch) < 128)
    result = " ".join(ascii_only.split())
    return result if result else None


def normalize_cues(cues: Sequence[SrtCue]) -> list[SrtCue]:
    """Apply ``normalize_utterance``; cues whose text drops are removed."""
    kept = []
    for cue in cues:
        text = normalize_utterance(cue.text)
        if text is not None:
            kept.append(replace(cue, text=text))
    return kept


def text_feature(text: str, dim: int = DEFAULT_TEXT_DIM) -> np.ndarray:
    """Deterministic hashed character-trigram embedding, unit L2 norm."""
    import zlib

    vec = np.zeros(dim)
    padded = f" {text.lower()} "
    for k in range(len(padded) - 2):
        tri = padded[k : k + 3]
        h = zlib.crc32(tri.encode("utf-8"))
        vec[h % dim] += 1.0 if (h >> 16) % 2 == 0 else -1.0
    norm = np.linalg.norm(vec)
    return vec / norm if norm > 0 else vec


def align_frames(
    frames: Sequence[RawFrame],
    cues: Sequence[SrtCue],
    keep_gap_ms: int = DEFAULT_KEEP_GAP_MS,
) -> list[AlignedFrame]:
    """Pair frames with covering cues; keep middle frames and gap fillers.

    A frame pairs with the first cue satisfying start <= timestamp <= end.
    Within one cue only the middle frame (ties toward earlier) is kept.
    Uncovered frames are dropped unless dropping one would leave more than
    ``keep_gap_ms`` between the kept frames around it.
    """
    times = [f.timestamp_ms for f in frames]
    if any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("frames must be sorted by timestamp")

    covering: list[int | None] = []
    for f in frames:
        hit = None
        for ci, cue in enumerate(cues):
            if cue.start_ms <= f.timestamp_ms <= cue.end_ms:
                hit = ci
                break
        covering.append(hit)

    by_cue: dict[int, list[int]] = {}
    for pos, ci in enumerate(covering):
        if ci is not None:
            by_cue.setdefault(ci, []).append(pos)
    representative = {members[(len(members) - 1) // 2] for members in by_cue.values()}
    rep_times = sorted(frames[pos].timestamp_ms for pos in representative)

    kept: list[AlignedFrame] = []
    prev_kept_ts: int | None = None
    for pos, frame in enumerate(frames):
        if pos in representative:
            kept.append(AlignedFrame(frame=frame, cue=cues[covering[pos]], paired=True))
            prev_kept_ts = frame.timestamp_ms
        elif covering[pos] is None:
            idx = np.searchsorted(rep_times, frame.timestamp_ms, side="right")
            next_rep_ts = rep_times[idx] if idx < len(rep_times) else None
            if (
                prev_kept_ts is not None
                and next_rep_ts is not None
                and next_rep_ts - prev_kept_ts > keep_gap_ms
            ):
                kept.append(AlignedFrame(frame=frame, cue=None, paired=False))
                prev_kept_ts = frame.timestamp_ms
        # frames merged into a cue's representative are dropped silently
    return kept


def _resolve_feature(frame: RawFrame, feature_root) -> np.ndarray:
    if isinstance(frame.feature, str):
        path = Path(frame.feature)
        if feature_root is not None and not path.is_absolute():
            path = Path(feature_root) / path
        return np.load(path)
    return np.asarray(frame.feature, dtype=np.float64)


def segment_clips(
    aligned: Sequence[AlignedFrame],
    movie_id: str = "movie",
    *,
    text_dim: int = DEFAULT_TEXT_DIM,
    feature_root=None,
) -> list[ClipPuzzle]:
    """Greedy left-to-right cut into maximal valid windows.

    At each start the longest window of at most 20 frames with more than 80%
    paired frames and at least 10 frames becomes a clip; otherwise the scan
    advances one frame. Frames get 1-based gt_index in time order.
    """
    clips: list[ClipPuzzle] = []
    i = 0
    n = len(aligned)
    ordinal = 0
    while i < n:
        emitted = False
        for length in range(min(MAX_CLIP_FRAMES, n - i), MIN_CLIP_FRAMES - 1, -1):
            window = aligned[i : i + length]
            paired = sum(1 for af in window if af.paired)
            if paired / length > MIN_PAIRED_FRACTION:
                frames = tuple(
                    FrameRecord(
                        frame_id=af.frame.frame_id,
                        vision_feat=_resolve_feature(af.frame, feature_root),
                        text_feat=text_feature(af.cue.text, text_dim) if af.paired else np.zeros(text_dim),
                        start_ms=af.frame.timestamp_ms,
                        end_ms=af.cue.end_ms if af.paired else af.frame.timestamp_ms,
                        shot_id=af.frame.shot_id,
                        scene_id=af.frame.scene_id,
                        gt_index=k + 1,
                    )
                    for k, af in enumerate(window)
                )
                clips.append(ClipPuzzle(f"{movie_id}:{ordinal:04d}", movie_id, frames))
                ordinal += 1
                i += length
                emitted = True
                break
        if not emitted:
            i += 1
    return clips


def read_frame_manifest(path) -> list[RawFrame]:
    """CSV columns: frame_id, timestamp_ms, feature_path, shot_id, scene_id."""
    frames = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            frames.append(
                RawFrame(
                    frame_id=int(row["frame_id"]),
                    timestamp_ms=int(row["timestamp_ms"]),
                    feature=row["feature_path"],
                    shot_id=int(row["shot_id"]),
                    scene_id=int(row["scene_id"]),
                )
            )
    return frames


def curate_movie(
    srt_text: str,
    frames: Sequence[RawFrame],
    movie_id: str,
    *,
    keep_gap_ms: int = DEFAULT_KEEP_GAP_MS,
    text_dim: int = DEFAULT_TEXT_DIM,
    feature_root=None,
) -> list[ClipPuzzle]:
    """Full single-movie pipeline: parse, normalize, align, segment."""
    cues = normalize_cues(parse_srt(srt_text))
    aligned = align_frames(frames, cues, keep_gap_ms=keep_gap_ms)
    return segment_clips(aligned, movie_id, text_dim=text_dim, feature_root=feature_root)


def split_dataset(
    clips: Sequence[ClipPuzzle],
    ratios: Sequence[float] = (0.70, 0.06, 0.12, 0.12),
    seed: int = 0,
) -> dict[str, list[ClipPuzzle]]:
    """Movie-aware split into train/val/test_in/test_out.

    The out-domain split takes whole movies whose clip total lands closest
    to its ratio (greedy, seeded order). Remaining movies contribute val and
    in-domain test clips by equally spaced selection per movie.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("ratios must sum to 1")
    by_movie: dict[str, list[ClipPuzzle]] = {}
    for clip in clips:
        by_movie.setdefault(clip.movie_id, []).append(clip)
    movies = sorted(by_movie)
    if len(movies) < 2:
        raise ValueError("need at least 2 movies to carve an out-domain split")

    total = len(clips)
    target_out = ratios[3] * total
    rng = np.random.default_rng(derive_seed(seed, "split/out"))
    order = [movies[i] for i in rng.permutation(len(movies))]
    out_movies: list[str] = []
    running = 0
    for movie in order:
        size = len(by_movie[movie])
        if len(out_movies) == len(movies) - 1:
            break
        if abs(running + size - target_out) < abs(running - target_out):
            out_movies.append(movie)
            running += size
    if not out_movies:
        out_movies = [min(order, key=lambda mv: abs(len(by_movie[mv]) - target_out))]

    splits: dict[str, list[ClipPuzzle]] = {"train": [], "val": [], "test_in": [], "test_out": []}
    for movie in out_movies:
        splits["test_out"].extend(by_movie[movie])

    in_movies = [m for m in movies if m not in set(out_movies)]
    in_total = ratios[0] + ratios[1] + ratios[2]
    frac_val = ratios[1] / in_total
    frac_test = ratios[2] / in_total
    cum_val = cum_test = 0.0
    taken_val = taken_test = 0
    for movie in in_movies:
        group = by_movie[movie]
        n = len(group)
        cum_val += n * frac_val
        cum_test += n * frac_test
        n_val = int(round(cum_val)) - taken_val
        n_test = int(round(cum_test)) - taken_test
        taken_val += n_val
        taken_test += n_test
        val_idx = _spaced_indices(n, n_val)
        rest = [i for i in range(n) if i not in set(val_idx)]
        test_idx = {rest[i] for i in _spaced_indices(len(rest), n_test)}
        for i, clip in enumerate(group):
            if i in set(val_idx):
                splits["val"].append(clip)
            elif i in test_idx:
                splits["test_in"].append(clip)
            else:
                splits["train"].append(clip)
    return splits


def _spaced_indices(n: int, k: int) -> list[int]:
    """k equally spaced indices into range(n)."""
    if k <= 0:
        return []
    if k >= n:
        return list(range(n))
    return sorted({int((j + 0.5) * n / k) for j in range(k)})


def dataset_stats(clips: Sequence[ClipPuzzle]) -> dict:
    """Curation report: paired fraction, clip count, scene/shot histograms."""
    n_frames = sum(c.n_frames for c in clips)
    n_paired = sum(1 for c in clips for f in c.frames if f.paired)
    scene_hist = Counter(len({f.scene_id for f in c.frames}) for c in clips)
    shot_hist = Counter(len({(f.scene_id, f.shot_id) for f in c.frames}) for c in clips)
    return {
        "n_clips": len(clips),
        "n_frames": n_frames,
        "paired_fraction": (n_paired / n_frames) if n_frames else 0.0,
        "scenes_per_clip": dict(sorted(scene_hist.items())),
        "shots_per_clip": dict(sorted(shot_hist.items())),
    }
