"""Reverse-mode autodiff, layers, optimizers and checkpoints."""

from .check import gradcheck, numeric_grad, relative_error
from .checkpoint import load_checkpoint, save_checkpoint
from .nn import MLP, Linear, ParamSet, kaiming_uniform
from .optim import AdamW, EarlyStopping, ReduceLROnPlateau
from .tensor import (
    Tape,
    Tensor,
    add,
    as_tensor,
    backward,
    concat,
    current_tape,
    div,
    exp,
    gather,
    matmul,
    mean,
    mul,
    neg,
    no_grad,
    reshape,
    scatter_sum,
    sigmoid,
    silu,
    sqrt,
    square,
    sub,
    sum_,
    transpose,
)

__all__ = [
    "AdamW", "EarlyStopping", "Linear", "MLP", "ParamSet", "ReduceLROnPlateau", "Tape", "Tensor",
    "add", "as_tensor", "backward", "concat", "current_tape", "div", "exp", "gather", "gradcheck",
    "kaiming_uniform", "load_checkpoint", "matmul", "mean", "mul", "neg", "no_grad", "numeric_grad",
    "relative_error", "reshape", "save_checkpoint", "scatter_sum", "sigmoid", "silu", "sqrt",
    "square", "sub", "sum_", "transpose",
]
