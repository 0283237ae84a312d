"""Minimal differentiable compute core."""

from .ops import (AttentionConfig, dense, feed_forward, init_attention, init_feed_forward, layer_norm, linear,
                  multi_head_attention, norm, softmax)
from .params import Initializer, ParameterStore, adam_step, backward, grad_norm
from .tensor import Tensor, as_tensor, concat, constant, log_softmax, masked_max, masked_softmax

__all__ = [
    "AttentionConfig", "Initializer", "ParameterStore", "Tensor", "adam_step", "as_tensor", "backward",
    "concat", "constant", "dense", "feed_forward", "grad_norm", "init_attention", "init_feed_forward",
    "layer_norm", "linear", "log_softmax", "masked_max", "masked_softmax", "multi_head_attention", "norm",
    "softmax",
]
