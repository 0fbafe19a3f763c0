"""From-scratch 3-D CNN video classifier."""
from .model import ArchConfig, ModelParams, forward, forward_batch, init_params, loss_and_gradients
from .training import (OptimizerState, TrainConfig, TrainResult, adam_step, fit, predict, predict_scores,
                       read_checkpoint, train, write_checkpoint)

__all__ = [
    "ArchConfig", "ModelParams", "OptimizerState", "TrainConfig", "TrainResult", "adam_step", "fit", "forward",
    "forward_batch", "init_params", "loss_and_gradients", "predict", "predict_scores", "read_checkpoint", "train",
    "write_checkpoint",
]
