"""Minimal tape-based reverse-mode autodiff over float64 numpy arrays."""
from .optim import AdamState, adam_step
from .tensor import (
    LOG_EPS,
    Tape,
    Tensor,
    abs_,
    add,
    as_tensor,
    backward,
    clamp,
    concat,
    constant,
    div,
    entropic_ot,
    exp,
    gather,
    log,
    log1p,
    matmul,
    max_,
    mean,
    min_,
    mul,
    neg,
    relu,
    reshape,
    segment_sum,
    sigmoid,
    square,
    sub,
    sum_,
    transpose,
)
from .check import finite_difference, relative_error

__all__ = [
    "LOG_EPS",
    "AdamState",
    "Tape",
    "Tensor",
    "abs_",
    "adam_step",
    "add",
    "as_tensor",
    "backward",
    "clamp",
    "concat",
    "constant",
    "div",
    "entropic_ot",
    "exp",
    "finite_difference",
    "gather",
    "log",
    "log1p",
    "matmul",
    "max_",
    "mean",
    "min_",
    "mul",
    "neg",
    "relative_error",
    "relu",
    "reshape",
    "segment_sum",
    "sigmoid",
    "square",
    "sub",
    "sum_",
    "transpose",
]
