"""Parameterised layers that register their weights in a ModelParams registry."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from . import functional as F
from .params import ModelParams, uniform_init
from .tensor import Tensor

PRELU_INIT = 0.25


class Conv2d:
    def __init__(
        self,
        params: ModelParams,
        name: str,
        in_channels: int,
        out_channels: int,
        kernel: Sequence[int] = (3, 3),
        stride: Sequence[int] = (1, 1),
        dilation: Sequence[int] = (1, 1),
        padding: Sequence[int] = (0, 0),
        groups: int = 1,
        bias: bool = True,
        rng: np.random.Generator | None = None,
    ):
        rng = rng or np.random.default_rng(0)
        kt, kf = kernel
        fan_in = (in_channels // groups) * kt * kf
        self.weight = params.add(
            f"{name}.weight",
            uniform_init(rng, (out_channels, in_channels // groups, kt, kf), fan_in),
            kind="conv",
        )
        self.bias = (
            params.add(f"{name}.bias", uniform_init(rng, (out_channels,), fan_in), kind="bias")
            if bias else None
        )
        self.stride = tuple(stride)
        self.dilation = tuple(dilation)
        self.padding = tuple(padding)
        self.groups = groups

    def __call__(self, x: Tensor) -> Tensor:
        return F.conv2d(
            x,
            self.weight.effective(),
            self.bias.tensor if self.bias else None,
            self.stride,
            self.dilation,
            self.padding,
            self.groups,
        )


class DSConv2d:
    """Depthwise-separable convolution: grouped k x k then pointwise 1 x 1."""

    def __init__(
        self,
        params: ModelParams,
        name: str,
        in_channels: int,
        out_channels: int,
        kernel: Sequence[int] = (3, 3),
        stride: Sequence[int] = (1, 1),
        dilation: Sequence[int] = (1, 1),
        padding: Sequence[int] = (0, 0),
        bias: bool = True,
        rng: np.random.Generator | None = None,
    ):
        self.depthwise = Conv2d(
            params, f"{name}.depthwise", in_channels, in_channels, kernel,
            stride, dilation, padding, groups=in_channels, bias=bias, rng=rng,
        )
        self.pointwise = Conv2d(
            params, f"{name}.pointwise", in_channels, out_channels, (1, 1), bias=bias, rng=rng,
        )

    def __call__(self, x: Tensor) -> Tensor:
        dw, pw = self.depthwise, self.pointwise
        return F.depthwise_separable_conv2d(
            x,
            dw.weight.effective(),
            pw.weight.effective(),
            dw.bias.tensor if dw.bias else None,
            pw.bias.tensor if pw.bias else None,
            dw.stride,
            dw.dilation,
            dw.padding,
        )


def make_conv(
    depthwise: bool,
    params: ModelParams,
    name: str,
    in_channels: int,
    out_channels: int,
    kernel: Sequence[int],
    stride: Sequence[int] = (1, 1),
    dilation: Sequence[int] = (1, 1),
    padding: Sequence[int] = (0, 0),
    rng: np.random.Generator | None = None,
) -> Conv2d | DSConv2d:
    cls = DSConv2d if depthwise else Conv2d
    return cls(
        params, name, in_channels, out_channels, kernel,
        stride=stride, dilation=dilation, padding=padding, rng=rng,
    )


class InstanceNorm2d:
    def __init__(self, params: ModelParams, name: str, channels: int, eps: float = 1e-5):
        self.gamma = params.add(f"{name}.gamma", np.ones(channels), kind="norm")
        self.beta = params.add(f"{name}.beta", np.zeros(channels), kind="norm")
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return F.instance_norm(x, self.gamma.tensor, self.beta.tensor, self.eps)


class PReLU:
    """One learnable slope per channel (axis 1 of [B, C, ...], or the last axis)."""

    def __init__(self, params: ModelParams, name: str, channels: int, channel_axis: int = 1):
        self.alpha = params.add(f"{name}.alpha", np.full(channels, PRELU_INIT), kind="prelu")
        self.channel_axis = channel_axis

    def __call__(self, x: Tensor) -> Tensor:
        alpha = self.alpha.tensor
        if self.channel_axis != -1 and x.ndim > 1:
            shape = [1] * x.ndim
            shape[self.channel_axis] = alpha.shape[0]
            alpha = alpha.reshape(shape)
        return F.prelu(x, alpha)


class Linear:
    def __init__(
        self,
        params: ModelParams,
        name: str,
        in_features: int,
        out_features: int,
        kind: str = "linear",
        rng: np.random.Generator | None = None,
    ):
        rng = rng or np.random.default_rng(0)
        self.weight = params.add(
            f"{name}.weight", uniform_init(rng, (in_features, out_features), in_features), kind=kind  # type: ignore[arg-type]
        )
        self.bias = params.add(
            f"{name}.bias", uniform_init(rng, (out_features,), in_features), kind="bias"
        )

    def __call__(self, x: Tensor) -> Tensor:
        return F.linear(x, self.weight.effective(), self.bias.tensor)


class LayerNorm:
    def __init__(self, params: ModelParams, name: str, dim: int, eps: float = 1e-5):
        self.gamma = params.add(f"{name}.gamma", np.ones(dim), kind="norm")
        self.beta = params.add(f"{name}.beta", np.zeros(dim), kind="norm")
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return F.layer_norm(x, self.gamma.tensor, self.beta.tensor, self.eps)


class LearnableSigmoid:
    """beta / (1 + exp(-alpha * x)); alpha has one slope per trailing-axis bin."""

    def __init__(self, params: ModelParams, name: str, features: int, beta: float):
        self.alpha = params.add(f"{name}.alpha", np.ones(features), kind="lsigmoid")
        self.beta = beta

    def __call__(self, x: Tensor) -> Tensor:
        return F.learnable_sigmoid(x, self.alpha.tensor, self.beta)
