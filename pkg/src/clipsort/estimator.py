"""Sklearn-style estimator wrapping training and hierarchical inference.

``ClipReorderer.fit`` trains the per-level order classifiers and projection
heads on a list of clips; ``predict`` returns one permutation per clip
(presentation index per predicted temporal position). The estimator follows
the scikit-learn contract (``get_params``/``set_params``, ``fit`` returns
``self``, ``NotFittedError`` before fitting) so it composes with the usual
tooling.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .cluster import ClusterConfig
from .inference import InferenceConfig, infer_order
from .model import ModelConfig, train
from .types import ClipPuzzle, ground_truth_permutation, validate_clip
from .metrics import ordering_score


class ClipReorderer(BaseEstimator):
    """Pairwise-order learner with top-down/bottom-up reordering inference."""

    def __init__(
        self,
        hidden_dim=512,
        proj_dim=64,
        lambda_=0.75,
        n_negatives=8,
        lr=1e-4,
        beta1=0.9,
        beta2=0.999,
        eps=1e-6,
        weight_decay=0.01,
        batch_size=8,
        epochs=5,
        pairs_per_clip=12,
        share_heads=False,
        level_mode="frame_shot",
        bsize=8,
        cluster_distance="euclidean",
        max_cluster_steps=1000,
        n_scenes=None,
        n_shots=None,
        seed=0,
    ):
        self.hidden_dim = hidden_dim
        self.proj_dim = proj_dim
        self.lambda_ = lambda_
        self.n_negatives = n_negatives
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.batch_size = batch_size
        self.epochs = epochs
        self.pairs_per_clip = pairs_per_clip
        self.share_heads = share_heads
        self.level_mode = level_mode
        self.bsize = bsize
        self.cluster_distance = cluster_distance
        self.max_cluster_steps = max_cluster_steps
        self.n_scenes = n_scenes
        self.n_shots = n_shots
        self.seed = seed

    @staticmethod
    def _check_clips(X) -> list[ClipPuzzle]:
        clips = list(X)
        if not clips:
            raise ValueError("need at least one clip")
        for clip in clips:
            if not isinstance(clip, ClipPuzzle):
                raise TypeError(f"expected ClipPuzzle, got {type(clip).__name__}")
            report = validate_clip(clip)
            if not report:
                raise ValueError(f"invalid clip {clip.clip_id}: {report.problem}")
        return clips

    def fit(self, X, y=None):
        """Train on a sequence of clips; feature dims are inferred from data."""
        clips = self._check_clips(X)
        first = clips[0].frames[0]
        config = ModelConfig(
            d_v=first.vision_feat.size,
            d_u=first.text_feat.size,
            hidden_dim=self.hidden_dim,
            proj_dim=self.proj_dim,
            lambda_=self.lambda_,
            n_negatives=self.n_negatives,
            lr=self.lr,
            beta1=self.beta1,
            beta2=self.beta2,
            eps=self.eps,
            weight_decay=self.weight_decay,
            batch_size=self.batch_size,
            epochs=self.epochs,
            pairs_per_clip=self.pairs_per_clip,
            share_heads=self.share_heads,
            seed=self.seed,
        )
        self.params_, self.loss_trace_ = train(clips, config)
        self.model_config_ = config
        return self

    def _inference_config(self) -> InferenceConfig:
        return InferenceConfig(
            level_mode=self.level_mode,
            bsize=self.bsize,
            n_scenes=self.n_scenes,
            n_shots=self.n_shots,
            cluster=ClusterConfig(m=1, max_steps=self.max_cluster_steps, distance=self.cluster_distance),
            seed=self.seed,
        )

    def _require_fitted(self) -> None:
        if not hasattr(self, "params_"):
            raise NotFittedError("this ClipReorderer instance is not fitted yet")

    def predict(self, X) -> list[np.ndarray]:
        """One permutation per clip: item index per predicted position."""
        self._require_fitted()
        clips = self._check_clips(X)
        cfg = self._inference_config()
        return [infer_order(clip, self.params_, cfg)[0] for clip in clips]

    def score(self, X, y=None) -> float:
        """Mean pairwise (beta=2) ordering score in [0, 1]."""
        self._require_fitted()
        clips = self._check_clips(X)
        preds = self.predict(clips)
        scores = [
            ordering_score(ground_truth_permutation(c), p, beta=2).score
            for c, p in zip(clips, preds)
            if c.n_frames >= 2
        ]
        if not scores:
            raise ValueError("no clip with at least 2 frames")
        return float(np.mean(scores))
