"""Training loops: segmentation pretraining, vanilla and few-shot
classification, and patient-level cross-validation."""

from cccdetect.training.pretrain import PretrainConfig, PretrainResult, pretrain_segmentation
from cccdetect.training.classify import (
    EpisodeConfig,
    FrozenFeatureCache,
    TrainConfig,
    TrainHistory,
    episode_loss_and_grads,
    fsl_predict,
    train_fsl,
    train_vanilla,
)
from cccdetect.training.crossval import (
    CrossValResult,
    build_clips,
    run_crossval,
    write_run_dir,
)

__all__ = [
    "PretrainConfig",
    "PretrainResult",
    "pretrain_segmentation",
    "TrainConfig",
    "EpisodeConfig",
    "TrainHistory",
    "FrozenFeatureCache",
    "train_vanilla",
    "train_fsl",
    "fsl_predict",
    "episode_loss_and_grads",
    "CrossValResult",
    "build_clips",
    "run_crossval",
    "write_run_dir",
]
