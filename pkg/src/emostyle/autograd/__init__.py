"""Minimal reverse-mode autodiff engine on numpy."""

from emostyle.autograd.functional import (
    concat,
    conv2d,
    conv2d_transpose,
    cross_entropy,
    dense,
    instance_norm,
    leaky_relu,
    log_softmax,
    mse,
    relu,
    sigmoid,
    softmax,
    sqrt,
    tanh,
)
from emostyle.autograd.gradcheck import gradcheck, numerical_grad
from emostyle.autograd.optim import Adam, AdamState, adam_step
from emostyle.autograd.tensor import Tensor, no_grad, tensor

__all__ = [
    "Adam",
    "AdamState",
    "Tensor",
    "adam_step",
    "concat",
    "conv2d",
    "conv2d_transpose",
    "cross_entropy",
    "dense",
    "gradcheck",
    "instance_norm",
    "leaky_relu",
    "log_softmax",
    "mse",
    "no_grad",
    "numerical_grad",
    "relu",
    "sigmoid",
    "softmax",
    "sqrt",
    "tanh",
    "tensor",
]
