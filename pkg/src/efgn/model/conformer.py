"""Multi-head attention, conformer blocks, and the two-stage (time, frequency) conformer stack."""
from __future__ import annotations

from typing import Callable

import numpy as np

from ..autodiff import functional as F
from ..autodiff.layers import LayerNorm, Linear
from ..autodiff.params import ModelParams, uniform_init
from ..autodiff.tensor import Tensor, matmul, reshape, transpose
from ..exceptions import ShapeError
from .config import GeneratorConfig

Projection = Callable[[Tensor], Tensor]


def mha_forward(
    x: Tensor,
    heads: int,
    query: Projection,
    key: Projection,
    value: Projection,
    output: Projection,
    return_weights: bool = False,
) -> Tensor | tuple[Tensor, np.ndarray]:
    """
    Scaled dot-product multi-head self-attention over the sequence axis of [..., L, D].

    Each head attends with softmax(Q K^T / sqrt(D/h)) V; heads are concatenated
    and passed through the output projection. No positional encoding is added.

    Returns:
        The attended sequence, plus the [..., h, L, L] weights when requested
    """
    *lead, length, dim = x.shape
    if heads < 1 or dim % heads:
        raise ShapeError(f"Model dim {dim} is not divisible by {heads} heads")
    head_dim = dim // heads
    n = len(lead)
    split = tuple(range(n)) + (n + 1, n, n + 2)

    def _heads(t: Tensor) -> Tensor:
        return transpose(reshape(t, (*lead, length, heads, head_dim)), split)

    q, k, v = _heads(query(x)), _heads(key(x)), _heads(value(x))
    swap = tuple(range(n + 1)) + (n + 2, n + 1)
    scores = matmul(q, transpose(k, swap)) * (1.0 / np.sqrt(head_dim))
    weights = F.softmax(scores, axis=-1)
    context = reshape(transpose(matmul(weights, v), split), (*lead, length, dim))
    out = output(context)
    if return_weights:
        return out, weights.data
    return out


class MultiHeadAttention:
    def __init__(
        self,
        params: ModelParams,
        name: str,
        dim: int,
        heads: int,
        rng: np.random.Generator | None = None,
    ):
        if dim % heads:
            raise ShapeError(f"Model dim {dim} is not divisible by {heads} heads")
        self.heads = heads
        self.query = Linear(params, f"{name}.query", dim, dim, kind="attention", rng=rng)
        self.key = Linear(params, f"{name}.key", dim, dim, kind="attention", rng=rng)
        self.value = Linear(params, f"{name}.value", dim, dim, kind="attention", rng=rng)
        self.output = Linear(params, f"{name}.output", dim, dim, kind="attention", rng=rng)

    def __call__(self, x: Tensor) -> Tensor:
        out = mha_forward(x, self.heads, self.query, self.key, self.value, self.output)
        assert isinstance(out, Tensor)
        return out


class ConvModule:
    """Pointwise (D -> 2D), GLU, depthwise 1-d conv, sequence norm, swish, pointwise (D -> D)."""

    def __init__(
        self,
        params: ModelParams,
        name: str,
        dim: int,
        kernel: int,
        rng: np.random.Generator | None = None,
    ):
        rng = rng or np.random.default_rng(0)
        self.expand = Linear(params, f"{name}.expand", dim, 2 * dim, kind="conv", rng=rng)
        self.depthwise = params.add(
            f"{name}.depthwise.weight", uniform_init(rng, (dim, kernel), kernel), kind="conv"
        )
        self.depthwise_bias = params.add(
            f"{name}.depthwise.bias", uniform_init(rng, (dim,), kernel), kind="bias"
        )
        self.norm_gamma = params.add(f"{name}.norm.gamma", np.ones(dim), kind="norm")
        self.norm_beta = params.add(f"{name}.norm.beta", np.zeros(dim), kind="norm")
        self.project = Linear(params, f"{name}.project", dim, dim, kind="conv", rng=rng)

    def __call__(self, x: Tensor) -> Tensor:
        *lead, length, dim = x.shape
        h = F.glu(self.expand(x), axis=-1)
        h = reshape(h, (-1, length, dim))
        h = F.depthwise_conv1d(h, self.depthwise.effective(), self.depthwise_bias.tensor)
        h = F.sequence_norm(h, self.norm_gamma.tensor, self.norm_beta.tensor)
        h = reshape(F.swish(h), (*lead, length, dim))
        return self.project(h)


class ConformerBlock:
    """
    Attention then convolution, each behind its own layer norm.

    With ``residual=True``: y1 = x + MHA(LN(x)); y2 = y1 + Conv(LN(y1)).
    With ``residual=False`` both skip additions are dropped.
    """

    def __init__(
        self,
        params: ModelParams,
        name: str,
        dim: int,
        heads: int,
        kernel: int = 31,
        residual: bool = True,
        rng: np.random.Generator | None = None,
    ):
        self.attn_norm = LayerNorm(params, f"{name}.attn_norm", dim)
        self.attention = MultiHeadAttention(params, f"{name}.attention", dim, heads, rng)
        self.conv_norm = LayerNorm(params, f"{name}.conv_norm", dim)
        self.conv = ConvModule(params, f"{name}.conv", dim, kernel, rng)
        self.residual = residual

    def __call__(self, x: Tensor) -> Tensor:
        h = self.attention(self.attn_norm(x))
        y1 = x + h if self.residual else h
        c = self.conv(self.conv_norm(y1))
        return y1 + c if self.residual else c


class TSConformer:
    """N blocks, each a time-axis conformer followed by a frequency-axis conformer."""

    def __init__(
        self,
        params: ModelParams,
        name: str,
        cfg: GeneratorConfig,
        rng: np.random.Generator | None = None,
    ):
        C = cfg.base_channels
        self.stages: list[tuple[ConformerBlock, ConformerBlock]] = [
            (
                ConformerBlock(
                    params, f"{name}.{i}.time", C, cfg.heads, cfg.conformer_kernel,
                    cfg.use_residual_attention, rng,
                ),
                ConformerBlock(
                    params, f"{name}.{i}.freq", C, cfg.heads, cfg.conformer_kernel,
                    cfg.use_residual_attention, rng,
                ),
            )
            for i in range(cfg.num_ts_blocks)
        ]

    def __call__(self, z: Tensor) -> Tensor:
        B, C, T, Fb = z.shape
        for time_block, freq_block in self.stages:
            # time stage: B*F sequences of length T
            seq = reshape(transpose(z, (0, 3, 2, 1)), (B * Fb, T, C))
            z = transpose(reshape(time_block(seq), (B, Fb, T, C)), (0, 3, 2, 1))
            # frequency stage: B*T sequences of length F
            seq = reshape(transpose(z, (0, 2, 3, 1)), (B * T, Fb, C))
            z = transpose(reshape(freq_block(seq), (B, T, Fb, C)), (0, 3, 1, 2))
        return z
