from .layers import (
    Activation,
    Conv2d,
    ConvSpec,
    ConvTranspose2d,
    FreqBatchNorm,
    Layer,
    conv_out_size,
    conv_transpose_out_size,
    l1_loss,
    l1_loss_grad,
)
from .adam import AdamState, adam_step
from .checkpoint import load_tensors, save_tensors

__all__ = [
    "Activation", "Conv2d", "ConvSpec", "ConvTranspose2d", "FreqBatchNorm",
    "Layer", "conv_out_size", "conv_transpose_out_size", "l1_loss",
    "l1_loss_grad", "AdamState", "adam_step", "load_tensors", "save_tensors",
]
