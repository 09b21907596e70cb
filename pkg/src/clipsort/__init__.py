"""Hierarchical reordering of shuffled multimodal clip sequences.

Train pairwise order classifiers with a contrastive clustering head, group
frames top-down with k-means, reorder bottom-up with beam search, and score
predictions with exact ordering metrics backed by brute-force oracles.
"""

__version__ = "0.1.0"

from .cluster import ClusterConfig, KmeansResult, distance, kmeans
from .datagen import GenConfig, default_config_set, generate_clip, generate_dataset, shuffle_clip
from .estimator import ClipReorderer
from .inference import EvalReport, InferenceConfig, InferenceTrace, evaluate_split, infer_order
from .metrics import ClusterEval, OrderingResult, cluster_iou, ordering_score, ordering_score_bruteforce
from .model import (
    ModelConfig,
    ModelParams,
    TrainingPair,
    backward,
    encode_frame,
    init_params,
    load_checkpoint,
    loss_cl,
    loss_cls,
    loss_total,
    pairwise_accuracy,
    phi_forward,
    pool_group,
    psi_forward,
    sample_pairs,
    save_checkpoint,
    train,
)
from .reorder import PathResult, ScoreMatrix, beam_search, comparator_matrix, exact_max_path, score_matrix
from .types import (
    ClipPuzzle,
    FrameRecord,
    Hierarchy,
    ground_truth_permutation,
    hierarchy_from_labels,
    read_clips_jsonl,
    validate_clip,
    write_clips_jsonl,
)

__all__ = [name for name in dir() if not name.startswith("_")]
