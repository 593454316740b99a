from .gradcheck import finite_difference_check
from .losses import (
    METRIC_LOSS_KINDS,
    LossValue,
    metric_loss,
    metric_loss_t,
    mse_alignment_loss,
    mse_loss_t,
)
from .model import (
    Architecture,
    EmbeddingModel,
    LayerSpec,
    conv_embedding_architecture,
    forward,
    identity_architecture,
    linear_embedding_architecture,
    load_checkpoint,
    save_checkpoint,
)
from .optim import AdamState, adam_step
from .tape import Tensor, avgpool2, conv3x3, l2norm_rows
from .train import PairedAlignmentSet, TrainConfig, TrainLog, align, alignment_loss_mean

__all__ = [
    "AdamState",
    "Architecture",
    "EmbeddingModel",
    "LayerSpec",
    "LossValue",
    "METRIC_LOSS_KINDS",
    "PairedAlignmentSet",
    "Tensor",
    "TrainConfig",
    "TrainLog",
    "adam_step",
    "align",
    "alignment_loss_mean",
    "avgpool2",
    "conv3x3",
    "conv_embedding_architecture",
    "finite_difference_check",
    "forward",
    "identity_architecture",
    "l2norm_rows",
    "linear_embedding_architecture",
    "load_checkpoint",
    "metric_loss",
    "metric_loss_t",
    "mse_alignment_loss",
    "mse_loss_t",
    "save_checkpoint",
]
