"""Neural-network primitives built on the tape (convolutions, norms, activations)."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from ..exceptions import ConfigError, ShapeError
from .tensor import (
    Tensor,
    as_tensor,
    concat,
    make_result,
    matmul,
    reshape,
    sigmoid,
    sqrt,
    tabs,
    transpose,
)

Pair = tuple[int, int]


def _pair(value: int | Sequence[int]) -> Pair:
    if isinstance(value, int):
        return value, value
    first, second = value
    return int(first), int(second)


def conv_output_extent(n: int, kernel: int, stride: int, dilation: int, padding: int) -> int:
    return (n + 2 * padding - dilation * (kernel - 1) - 1) // stride + 1


# ---------------------------------------------------------------------------
# convolution
# ---------------------------------------------------------------------------
def conv2d(
    x: Tensor,
    weight: Tensor,
    bias: Tensor | None = None,
    stride: int | Sequence[int] = 1,
    dilation: int | Sequence[int] = 1,
    padding: int | Sequence[int] = 0,
    groups: int = 1,
) -> Tensor:
    """
    Grouped 2-D cross-correlation (no kernel flip).

    Args:
        x: Input of shape [B, Ci, T, F]
        weight: Kernel of shape [Co, Ci/groups, kt, kf]
        bias: Optional [Co]
        stride, dilation, padding: (time, frequency) pairs or scalars
        groups: Channel groups; ``groups == Ci`` gives a depthwise convolution

    Returns:
        Tensor of shape [B, Co, T', F']

    Raises:
        ShapeError: On channel mismatch or when an output extent is below 1
    """
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError(f"conv2d expects 4-d input and weight, got {x.shape} and {weight.shape}")
    st, sf = _pair(stride)
    dt, df = _pair(dilation)
    pt, pf = _pair(padding)
    B, Ci, T, F = x.shape
    Co, Cig, kt, kf = weight.shape
    if groups < 1 or Ci % groups or Co % groups or Cig * groups != Ci:
        raise ShapeError(
            f"conv2d channel mismatch: input has {Ci} channels, weight {weight.shape}, groups={groups}"
        )
    To = conv_output_extent(T, kt, st, dt, pt)
    Fo = conv_output_extent(F, kf, sf, df, pf)
    if To < 1 or Fo < 1:
        raise ShapeError(f"conv2d produces an empty output ({To}x{Fo}) for input {x.shape}")

    G, Cog = groups, Co // groups
    K = Cig * kt * kf
    xp = np.pad(x.data, ((0, 0), (0, 0), (pt, pt), (pf, pf)))
    cols = np.empty((B, Ci, kt, kf, To, Fo), dtype=np.result_type(x.dtype, weight.dtype))
    for i in range(kt):
        for j in range(kf):
            cols[:, :, i, j] = xp[
                :, :,
                i * dt: i * dt + st * (To - 1) + 1: st,
                j * df: j * df + sf * (Fo - 1) + 1: sf,
            ]
    cols_mat = (
        cols.reshape(B, G, Cig, kt, kf, To, Fo)
        .transpose(0, 1, 5, 6, 2, 3, 4)
        .reshape(B, G, To * Fo, K)
    )
    w_mat = weight.data.reshape(G, Cog, K).transpose(0, 2, 1)
    out = np.matmul(cols_mat, w_mat)  # [B, G, P, Cog]
    out = out.transpose(0, 1, 3, 2).reshape(B, Co, To, Fo)
    if bias is not None:
        out = out + bias.data.reshape(1, Co, 1, 1)

    def _backward(g: np.ndarray) -> tuple[np.ndarray | None, ...]:
        gm = g.reshape(B, G, Cog, To * Fo).transpose(0, 1, 3, 2)
        gw = None
        if weight.requires_grad:
            gw = np.matmul(cols_mat.transpose(0, 1, 3, 2), gm).sum(axis=0)
            gw = gw.transpose(0, 2, 1).reshape(weight.shape)
        gx = None
        if x.requires_grad:
            gcols = np.matmul(gm, w_mat.transpose(0, 2, 1))
            gcols = (
                gcols.reshape(B, G, To, Fo, Cig, kt, kf)
                .transpose(0, 1, 4, 5, 6, 2, 3)
                .reshape(B, Ci, kt, kf, To, Fo)
            )
            gxp = np.zeros_like(xp, dtype=gcols.dtype)
            for i in range(kt):
                for j in range(kf):
                    gxp[
                        :, :,
                        i * dt: i * dt + st * (To - 1) + 1: st,
                        j * df: j * df + sf * (Fo - 1) + 1: sf,
                    ] += gcols[:, :, i, j]
            gx = gxp[:, :, pt: pt + T, pf: pf + F]
        grads: list[np.ndarray | None] = [gx, gw]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return grads

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return make_result("conv2d", out, inputs, _backward)


def depthwise_separable_conv2d(
    x: Tensor,
    dw_weight: Tensor,
    pw_weight: Tensor,
    dw_bias: Tensor | None = None,
    pw_bias: Tensor | None = None,
    stride: int | Sequence[int] = 1,
    dilation: int | Sequence[int] = 1,
    padding: int | Sequence[int] = 0,
) -> Tensor:
    """Per-channel spatial convolution followed by a 1x1 cross-channel convolution."""
    C = x.shape[1]
    if dw_weight.shape[0] != C or dw_weight.shape[1] != 1:
        raise ShapeError(
            f"Depthwise kernel {dw_weight.shape} does not match {C} input channels"
        )
    if pw_weight.shape[1:] != (C, 1, 1):
        raise ShapeError(f"Pointwise kernel {pw_weight.shape} does not match {C} channels")
    depthwise = conv2d(x, dw_weight, dw_bias, stride, dilation, padding, groups=C)
    return conv2d(depthwise, pw_weight, pw_bias)


def depthwise_conv1d(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """
    Depthwise convolution along the sequence axis of [N, L, D] with same padding.

    ``weight`` has shape [D, k] with odd k.
    """
    N, L, D = x.shape
    k = weight.shape[1]
    if weight.shape[0] != D:
        raise ShapeError(f"Depthwise 1-d kernel {weight.shape} does not match dim {D}")
    if k % 2 == 0:
        raise ShapeError(f"Same padding requires an odd kernel, got {k}")
    as_image = reshape(transpose(x, (0, 2, 1)), (N, D, L, 1))
    kernel = reshape(weight, (D, 1, k, 1))
    out = conv2d(as_image, kernel, bias, padding=(k // 2, 0), groups=D)
    return transpose(reshape(out, (N, D, L)), (0, 2, 1))


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """``x @ weight + bias`` with weight of shape [in, out]."""
    out = matmul(x, weight)
    return out + bias if bias is not None else out


# ---------------------------------------------------------------------------
# normalization
# ---------------------------------------------------------------------------
def _normalize(x: Tensor, axes: tuple[int, ...], eps: float) -> Tensor:
    centered = x - x.mean(axis=axes, keepdims=True)
    var = (centered * centered).mean(axis=axes, keepdims=True)
    return centered / sqrt(var + eps)


def instance_norm(
    x: Tensor, gamma: Tensor | None = None, beta: Tensor | None = None, eps: float = 1e-5
) -> Tensor:
    """Normalize each (sample, channel) over the trailing T x F grid, then apply gamma/beta."""
    if eps <= 0:
        raise ConfigError("eps must be positive")
    if x.ndim != 4:
        raise ShapeError(f"instance_norm expects [B, C, T, F], got {x.shape}")
    y = _normalize(x, (2, 3), eps)
    C = x.shape[1]
    if gamma is not None:
        y = y * reshape(gamma, (1, C, 1, 1))
    if beta is not None:
        y = y + reshape(beta, (1, C, 1, 1))
    return y


def sequence_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Instance-style norm of [N, L, D] over the sequence axis, per channel."""
    return _normalize(x, (1,), eps) * gamma + beta


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    return _normalize(x, (x.ndim - 1,), eps) * gamma + beta


# ---------------------------------------------------------------------------
# activations
# ---------------------------------------------------------------------------
def prelu(x: Tensor, alpha: Tensor) -> Tensor:
    """x where x >= 0, alpha * x otherwise; alpha broadcasts against x."""
    positive = x.data >= 0
    out = np.where(positive, x.data, alpha.data * x.data)

    def _backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        gx = np.where(positive, g, g * alpha.data)
        ga = np.where(positive, 0.0, g * x.data)
        return gx, ga

    return make_result("prelu", out.astype(x.dtype, copy=False), (x, alpha), _backward)


def learnable_sigmoid(x: Tensor, alpha: Tensor, beta: float) -> Tensor:
    """``beta / (1 + exp(-alpha * x))`` with alpha broadcast over the last axis."""
    return sigmoid(x * alpha) * beta


def swish(x: Tensor) -> Tensor:
    return x * sigmoid(x)


def glu(x: Tensor, axis: int = -1) -> Tensor:
    n = x.shape[axis]
    if n % 2:
        raise ShapeError(f"glu needs an even extent along axis {axis}, got {n}")
    index_a = [slice(None)] * x.ndim
    index_b = [slice(None)] * x.ndim
    index_a[axis] = slice(0, n // 2)
    index_b[axis] = slice(n // 2, n)
    return x[tuple(index_a)] * sigmoid(x[tuple(index_b)])


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    if not -x.ndim <= axis < x.ndim:
        raise ShapeError(f"Axis {axis} is out of range for a {x.ndim}-d tensor")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def _backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return make_result("softmax", out, (x,), _backward)


def dropout(
    x: Tensor, p: float, training: bool = True, rng: np.random.Generator | None = None
) -> Tensor:
    """Inverted dropout; identity when not training or when p == 0."""
    if not 0.0 <= p < 1.0:
        raise ConfigError(f"Dropout probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    rng = rng or np.random.default_rng()
    keep = (rng.random(x.shape) >= p).astype(x.dtype) / (1.0 - p)
    return x * as_tensor(keep, like=x)


# ---------------------------------------------------------------------------
# shape helpers
# ---------------------------------------------------------------------------
def flatten(x: Tensor, start_axis: int = 1) -> Tensor:
    lead = x.shape[:start_axis]
    return reshape(x, lead + (-1,))


def pad(x: Tensor, widths: Sequence[tuple[int, int]]) -> Tensor:
    """Zero padding with (before, after) per axis."""
    if len(widths) != x.ndim:
        raise ShapeError(f"pad needs {x.ndim} (before, after) pairs, got {len(widths)}")
    out = np.pad(x.data, widths)
    crop = tuple(slice(b, b + n) for (b, _), n in zip(widths, x.shape))
    return make_result("pad", out, (x,), lambda g: (g[crop],))


def upsample_nearest(x: Tensor, factor: int, axis: int = -1) -> Tensor:
    """Repeat every element ``factor`` times along ``axis``."""
    ax = axis % x.ndim
    out = np.repeat(x.data, factor, axis=ax)

    def _backward(g: np.ndarray) -> tuple[np.ndarray]:
        shape = x.shape[:ax] + (x.shape[ax], factor) + x.shape[ax + 1:]
        return (g.reshape(shape).sum(axis=ax + 1),)

    return make_result("upsample_nearest", out, (x,), _backward)


def adaptive_max_pool2d(x: Tensor, output_size: int | Sequence[int]) -> Tensor:
    """
    Max over a t x f partition of the trailing grid.

    Window i spans [floor(i*T/t), floor((i+1)*T/t)); the gradient goes to the
    first maximum in row-major order within each window.
    """
    t, f = _pair(output_size)
    B, C, T, F = x.shape
    if t > T or f > F or t < 1 or f < 1:
        raise ShapeError(f"Pooled grid ({t}, {f}) does not fit input extents ({T}, {F})")
    t_edges = [(i * T) // t for i in range(t + 1)]
    f_edges = [(j * F) // f for j in range(f + 1)]
    out = np.empty((B, C, t, f), dtype=x.dtype)
    argmax: dict[tuple[int, int], np.ndarray] = {}
    for i in range(t):
        for j in range(f):
            window = x.data[:, :, t_edges[i]:t_edges[i + 1], f_edges[j]:f_edges[j + 1]]
            flat = window.reshape(B, C, -1)
            idx = flat.argmax(axis=-1)
            argmax[(i, j)] = idx
            out[:, :, i, j] = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]

    def _backward(g: np.ndarray) -> tuple[np.ndarray]:
        gx = np.zeros_like(x.data)
        for i in range(t):
            for j in range(f):
                th = t_edges[i + 1] - t_edges[i]
                fw = f_edges[j + 1] - f_edges[j]
                window = np.zeros((B, C, th * fw), dtype=x.dtype)
                np.put_along_axis(window, argmax[(i, j)][..., None], g[:, :, i, j][..., None], axis=-1)
                gx[:, :, t_edges[i]:t_edges[i + 1], f_edges[j]:f_edges[j + 1]] += window.reshape(
                    B, C, th, fw
                )
        return (gx,)

    return make_result("adaptive_max_pool2d", out, (x,), _backward)


# ---------------------------------------------------------------------------
# reductions used as losses
# ---------------------------------------------------------------------------
def mean(x: Tensor, axis: int | tuple[int, ...] | None = None) -> Tensor:
    return x.mean(axis=axis)


def l1_norm(a: Tensor, b: Tensor | None = None) -> Tensor:
    """Mean absolute value of ``a`` (or of ``a - b``)."""
    diff = a if b is None else a - b
    return tabs(diff).mean()


def mse(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"mse operands differ in shape: {a.shape} vs {b.shape}")
    diff = a - b
    return (diff * diff).mean()


__all__ = [
    "adaptive_max_pool2d",
    "concat",
    "conv2d",
    "conv_output_extent",
    "depthwise_conv1d",
    "depthwise_separable_conv2d",
    "dropout",
    "flatten",
    "glu",
    "instance_norm",
    "l1_norm",
    "layer_norm",
    "learnable_sigmoid",
    "linear",
    "mean",
    "mse",
    "pad",
    "prelu",
    "sequence_norm",
    "softmax",
    "swish",
    "upsample_nearest",
]
