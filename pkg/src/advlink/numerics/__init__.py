"""Small float64 neural-network core: layers, stacks, optimizers, checkpoints."""

from .layers import (
    ELU,
    BatchNorm1d,
    Conv1d,
    ConvTranspose1d,
    Dropout,
    Layer,
    LeakyReLU,
    Linear,
    LogSoftmax,
    ReLU,
    Reshape,
)
from .optim import Adam, Optimizer, RMSprop
from .stack import LayerStack, clip_weights, count_flops, count_params, max_abs_weight
from .tensor import NonFiniteError, ShapeError, Tensor, check_finite

__all__ = [
    "Adam", "BatchNorm1d", "Conv1d", "ConvTranspose1d", "Dropout", "ELU", "Layer",
    "LayerStack", "LeakyReLU", "Linear", "LogSoftmax", "NonFiniteError", "Optimizer",
    "RMSprop", "ReLU", "Reshape", "ShapeError", "Tensor", "check_finite", "clip_weights",
    "count_flops", "count_params", "max_abs_weight",
]
