"""From-scratch U-Net segmentation network used by both picking stages."""
from .losses import bce_loss, mixed_loss, sobel_grad_loss, sobel_magnitude
from .optim import init_state, optimizer_step
from .trainer import TrainConfig, TrainResult, early_stopping_loop, evaluate_loss, train
from .unet import ModelParams, UNetConfig, backward, forward, init_params, loss_and_grads

__all__ = [
    "ModelParams", "TrainConfig", "TrainResult", "UNetConfig", "backward", "bce_loss", "early_stopping_loop",
    "evaluate_loss", "forward", "init_params", "init_state", "loss_and_grads", "mixed_loss",
    "optimizer_step", "sobel_grad_loss", "sobel_magnitude", "train",
]
