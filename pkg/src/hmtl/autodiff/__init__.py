"""Reverse-mode autodiff on dense float64 tensors, plus losses and Adam."""

from hmtl.autodiff.adam import AdamState, adam_step
from hmtl.autodiff.losses import PROB_EPS, loss_bce_masked, loss_mse_masked
from hmtl.autodiff.ops import (
    add,
    affine,
    column,
    concat,
    dropout,
    elementwise_map,
    linear,
    lstm_cell,
    masked_fill,
    matmul,
    mean,
    mul,
    neg,
    repeat_time,
    reshape,
    scale,
    sigmoid,
    stack,
    sub,
    take_time,
    tanh,
    total,
)
from hmtl.autodiff.tensor import Tape, Tensor, active_tape, graph_backward

__all__ = [
    "AdamState",
    "PROB_EPS",
    "Tape",
    "Tensor",
    "active_tape",
    "adam_step",
    "add",
    "affine",
    "column",
    "concat",
    "dropout",
    "elementwise_map",
    "graph_backward",
    "linear",
    "loss_bce_masked",
    "loss_mse_masked",
    "lstm_cell",
    "masked_fill",
    "matmul",
    "mean",
    "mul",
    "neg",
    "repeat_time",
    "reshape",
    "scale",
    "sigmoid",
    "stack",
    "sub",
    "take_time",
    "tanh",
    "total",
]
