import numpy as np
import pytest

from clipsort.types import ClipPuzzle, FrameRecord


def make_frame(frame_id, gt_index, shot_id=1, scene_id=1, v=None, u=None, offset=0.0):
    if v is None:
        v = [float(gt_index), offset]
    if u is None:
        u = [0.5 * gt_index]
    return FrameRecord(
        frame_id=frame_id,
        vision_feat=v,
        text_feat=u,
        start_ms=(gt_index - 1) * 1000,
        end_ms=(gt_index - 1) * 1000 + 900,
        shot_id=shot_id,
        scene_id=scene_id,
        gt_index=gt_index,
    )


def make_clip(gt_indices, shot_ids=None, scene_ids=None, clip_id="clip-a", movie_id="movie-a"):
    """Clip from presentation-order gt indices and optional structure labels."""
    n = len(gt_indices)
    shot_ids = shot_ids if shot_ids is not None else [1] * n
    scene_ids = scene_ids if scene_ids is not None else [1] * n
    offset = (sum(clip_id.encode()) % 97) / 10.0  # clip-distinct features
    frames = [
        make_frame(frame_id=k, gt_index=g, shot_id=st, scene_id=sn, offset=offset)
        for k, (g, st, sn) in enumerate(zip(gt_indices, shot_ids, scene_ids))
    ]
    return ClipPuzzle(clip_id, movie_id, tuple(frames))


@pytest.fixture
def rng():
    return np.random.default_rng(0)
