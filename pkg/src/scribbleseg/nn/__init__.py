"""Minimal float32 conv stack with hand-written reverse-mode gradients."""

from .unet import Predictor, UNetWeights, unet_backward, unet_forward
from .losses import LossConfig, focal_loss, seg_loss, soft_dice_loss
from .optim import AdamState, adam_step
from .weights_io import load_weights, save_weights

__all__ = [
    "AdamState",
    "LossConfig",
    "Predictor",
    "UNetWeights",
    "adam_step",
    "focal_loss",
    "load_weights",
    "save_weights",
    "seg_loss",
    "soft_dice_loss",
    "unet_backward",
    "unet_forward",
]
