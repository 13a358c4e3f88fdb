"""Minimal tensor/NN engine: layers, losses, Adam, and cost accounting."""

from .flops import flop_count, resolve_shapes
from .layers import (
    LAYER_KINDS,
    BatchNorm2D,
    Conv2D,
    Dense,
    DepthwiseConv2D,
    GlobalAvgPool,
    Layer,
    PointwiseConv2D,
    ReLU,
    Softmax,
    col2im,
    im2col,
)
from .losses import cross_entropy, softmax
from .optim import Adam, AdamState, adam_step

__all__ = [
    "LAYER_KINDS", "BatchNorm2D", "Conv2D", "Dense", "DepthwiseConv2D",
    "GlobalAvgPool", "Layer", "PointwiseConv2D", "ReLU", "Softmax",
    "col2im", "im2col", "flop_count", "resolve_shapes", "cross_entropy",
    "softmax", "Adam", "AdamState", "adam_step",
]
