from .config import LossWeights, TrainConfig
from .losses import (
    kl_diag_gauss,
    loss_contrastive,
    loss_cycle,
    loss_identity,
    loss_rec,
    stage1_losses,
)
from .stage1 import Stage1Result, WindowSampler, train_stage1
from .stage2 import Stage2Result, train_stage2, unroll_losses

__all__ = [
    "LossWeights",
    "TrainConfig",
    "kl_diag_gauss",
    "loss_contrastive",
    "loss_cycle",
    "loss_identity",
    "loss_rec",
    "stage1_losses",
    "Stage1Result",
    "WindowSampler",
    "train_stage1",
    "Stage2Result",
    "train_stage2",
    "unroll_losses",
]
