"""Minimal tensor library with tape-based reverse-mode differentiation."""

from efgn.autodiff.tensor import (
    Tape,
    TapeNode,
    Tensor,
    active_tape,
    add,
    atan2,
    backward,
    concat,
    cos,
    div,
    is_grad_enabled,
    matmul,
    mul,
    no_grad,
    reset_tape,
    sigmoid,
    sin,
    stack,
    sub,
    where,
)
from efgn.autodiff.params import ModelParams, Parameter, param_count
from efgn.autodiff.gradcheck import GradCheckReport, grad_check, grad_check_report

__all__ = [
    "GradCheckReport",
    "ModelParams",
    "Parameter",
    "Tape",
    "TapeNode",
    "Tensor",
    "active_tape",
    "add",
    "atan2",
    "backward",
    "concat",
    "cos",
    "div",
    "grad_check",
    "grad_check_report",
    "is_grad_enabled",
    "matmul",
    "mul",
    "no_grad",
    "param_count",
    "reset_tape",
    "sigmoid",
    "sin",
    "stack",
    "sub",
    "where",
]
