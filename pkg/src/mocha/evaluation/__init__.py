from .ablation import (
    VARIANTS,
    PipelineArtifacts,
    ablation_table,
    alternating_context,
    evaluate_pipeline,
    history_tail,
    ncm_rollout,
    nn_rollout,
    run_ablation,
    run_pipeline,
    transfer_bone_length_error,
)
from .classifier import WindowClassifier, recognition_accuracy, train_window_classifier
from .fmd import GaussianStats, fmd, pooled_features
from .metrics import bone_length_error, continuity, gait_amplitude

__all__ = [
    "GaussianStats",
    "PipelineArtifacts",
    "VARIANTS",
    "WindowClassifier",
    "ablation_table",
    "alternating_context",
    "bone_length_error",
    "continuity",
    "evaluate_pipeline",
    "fmd",
    "gait_amplitude",
    "history_tail",
    "ncm_rollout",
    "nn_rollout",
    "pooled_features",
    "recognition_accuracy",
    "run_ablation",
    "run_pipeline",
    "train_window_classifier",
    "transfer_bone_length_error",
]
