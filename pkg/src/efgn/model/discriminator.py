"""Metric discriminator scoring (clean, other) compressed-magnitude pairs in [0, 1]."""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from ..autodiff import functional as F
from ..autodiff.layers import Conv2d, InstanceNorm2d, LearnableSigmoid, Linear, PReLU
from ..autodiff.params import ModelParams
from ..autodiff.tensor import Tensor, as_tensor, concat, reshape
from ..exceptions import NonFiniteLossError, ShapeError, SpectralNormError
from ..logging_utils import get_logger
from .config import DiscriminatorConfig

logger = get_logger(__name__)

DISCRIMINATOR_PREFIX = "discriminator"
SIGMA_FLOOR = 1e-12
SN_WARMUP_ITERS = 30
SN_RECONVERGE_ITERS = 100
SN_TOLERANCE = 0.1


class SpectralNorm(NamedTuple):
    weight: Tensor
    sigma: float
    degenerate: bool


def _unit(v: np.ndarray) -> np.ndarray:
    return v / max(float(np.linalg.norm(v)), SIGMA_FLOOR)


def power_iteration(matrix: np.ndarray, u: np.ndarray, iters: int) -> tuple[np.ndarray, np.ndarray]:
    """Refine the leading left/right singular vectors of ``matrix`` starting from ``u``."""
    v = _unit(matrix.T @ u)
    for _ in range(iters):
        u = _unit(matrix @ v)
        v = _unit(matrix.T @ u)
    return u, v


def spectral_normalize(
    weight: Tensor,
    u: np.ndarray,
    v: np.ndarray | None = None,
    iters: int = 1,
    update: bool = True,
) -> SpectralNorm:
    """
    Divide ``weight`` by its estimated largest singular value.

    The weight is viewed as a [Co, prod(rest)] matrix. ``u`` and ``v`` are the
    persistent singular-vector estimates; with ``update`` they are refined in
    place by ``iters`` power iterations, otherwise they are used as stored
    (``v`` defaults to the normalized W^T u). sigma = u^T W v is part of the
    graph with u and v held constant. A (near) zero matrix is returned
    unchanged and flagged.
    """
    matrix = weight.data.reshape(weight.shape[0], -1)
    if u.shape != (matrix.shape[0],):
        raise ShapeError(f"Spectral-norm vector {u.shape} does not match weight {weight.shape}")
    if update:
        new_u, new_v = power_iteration(matrix, u, iters)
        u[...] = new_u
        if v is None:
            v = new_v
        else:
            v[...] = new_v
    elif v is None:
        v = _unit(matrix.T @ u)
    sigma_value = float(u @ matrix @ v)
    if abs(sigma_value) < SIGMA_FLOOR:
        logger.warning("Spectral norm skipped for a zero weight matrix %s", weight.shape)
        return SpectralNorm(weight, sigma_value, True)
    outer = as_tensor(np.outer(u, v).reshape(weight.shape), like=weight)
    sigma = (weight * outer).sum()
    return SpectralNorm(weight / sigma, sigma_value, False)


class SNConv2d:
    """Strided conv whose kernel is spectrally normalized on every call."""

    def __init__(
        self,
        params: ModelParams,
        name: str,
        in_channels: int,
        out_channels: int,
        cfg: DiscriminatorConfig,
        rng: np.random.Generator,
    ):
        kt, kf = cfg.kernel
        self.conv = Conv2d(
            params, name, in_channels, out_channels, cfg.kernel,
            stride=cfg.stride, padding=(kt // 2, kf // 2), rng=rng,
        )
        self.name = name
        self.iters = cfg.sn_iters
        matrix = self.conv.weight.data.reshape(out_channels, -1)
        u, v = power_iteration(matrix, _unit(rng.normal(size=out_channels)), SN_WARMUP_ITERS)
        self.u = params.add_buffer(f"{name}.sn_u", u)
        self.v = params.add_buffer(f"{name}.sn_v", v)
        self.sigma = float("nan")

    def __call__(self, x: Tensor, update: bool = False) -> Tensor:
        sn = spectral_normalize(self.conv.weight.effective(), self.u, self.v, self.iters, update)
        self.sigma = sn.sigma
        c = self.conv
        return F.conv2d(
            x, sn.weight, c.bias.tensor if c.bias else None, c.stride, c.dilation, c.padding
        )

    def normalized_sigma(self) -> float:
        """Largest singular value of the currently normalized kernel (exact SVD)."""
        matrix = self.conv.weight.effective().data.reshape(self.u.shape[0], -1)
        estimate = float(self.u @ matrix @ self.v)
        if abs(estimate) < SIGMA_FLOOR:
            return 0.0
        return float(np.linalg.norm(matrix, 2) / estimate)

    def reconverge(self, iters: int = SN_RECONVERGE_ITERS) -> None:
        """Restart the power iteration on the current (masked) kernel."""
        matrix = self.conv.weight.effective().data.reshape(self.u.shape[0], -1)
        u, v = power_iteration(matrix, self.u, iters)
        self.u[...] = u
        self.v[...] = v


class Discriminator:
    """
    concat -> [SN conv, instance norm, PReLU] per stage -> adaptive max pool ->
    flatten -> linear -> dropout -> linear -> learnable sigmoid (beta = 1).
    """

    def __init__(
        self,
        cfg: DiscriminatorConfig,
        params: ModelParams | None = None,
        rng: np.random.Generator | None = None,
        prefix: str = DISCRIMINATOR_PREFIX,
    ):
        self.cfg = cfg.validate()
        self.params = params if params is not None else ModelParams()
        rng = rng or np.random.default_rng(0)
        self.stages: list[tuple[SNConv2d, InstanceNorm2d, PReLU]] = []
        in_channels = 2
        for i, channels in enumerate(cfg.channels):
            name = f"{prefix}.conv.{i}"
            self.stages.append((
                SNConv2d(self.params, name, in_channels, channels, cfg, rng),
                InstanceNorm2d(self.params, f"{name}.norm", channels),
                PReLU(self.params, f"{name}.act", channels),
            ))
            in_channels = channels
        t, f = cfg.pooled
        self.hidden = Linear(self.params, f"{prefix}.hidden", in_channels * t * f, cfg.hidden, rng=rng)
        self.output = Linear(self.params, f"{prefix}.output", cfg.hidden, 1, rng=rng)
        self.lsigmoid = LearnableSigmoid(self.params, f"{prefix}.lsigmoid", 1, cfg.output_beta)

    def __call__(
        self,
        clean_mag_c: Tensor | np.ndarray,
        other_mag_c: Tensor | np.ndarray,
        training: bool = False,
        update_sn: bool = False,
        rng: np.random.Generator | None = None,
    ) -> Tensor:
        """
        Score [B, T, F] compressed magnitudes; returns [B] scores in [0, 1].

        Args:
            training: Enables dropout
            update_sn: Advance the spectral-norm power iteration
            rng: Dropout randomness
        """
        dtype = self.params.dtype
        clean = clean_mag_c if isinstance(clean_mag_c, Tensor) else Tensor(clean_mag_c, dtype=dtype)
        other = other_mag_c if isinstance(other_mag_c, Tensor) else Tensor(other_mag_c, dtype=dtype)
        if clean.shape != other.shape or clean.ndim != 3:
            raise ShapeError(
                f"Discriminator inputs must be matching [B, T, F] grids, got {clean.shape} and {other.shape}"
            )
        B, T, Fb = clean.shape
        x = concat([reshape(clean, (B, 1, T, Fb)), reshape(other, (B, 1, T, Fb))], axis=1)
        for conv, norm, act in self.stages:
            x = act(norm(conv(x, update=update_sn)))
        x = F.flatten(F.adaptive_max_pool2d(x, self.cfg.pooled))
        x = F.dropout(self.hidden(x), self.cfg.dropout, training, rng)
        score = self.lsigmoid(self.output(x))
        return reshape(score, (B,))

    def sigmas(self) -> dict[str, float]:
        """Spectral-norm estimates used by the most recent forward pass."""
        return {conv.name: conv.sigma for conv, _, _ in self.stages}

    def normalized_sigmas(self) -> dict[str, float]:
        return {conv.name: conv.normalized_sigma() for conv, _, _ in self.stages}

    def check_spectral_norms(self, tolerance: float = SN_TOLERANCE) -> dict[str, float]:
        """
        Largest singular value of every normalized kernel, each within 1 +/- ``tolerance``.

        An estimate outside the band (typically right after pruning changes a
        kernel) is re-converged once before the check is repeated. Zero
        kernels are skipped, as ``spectral_normalize`` already flags them.

        Raises:
            NonFiniteLossError: If a sigma is NaN or infinite
            SpectralNormError: If a kernel stays outside the band after re-convergence
        """
        sigmas: dict[str, float] = {}
        for conv, _, _ in self.stages:
            sigma = conv.normalized_sigma()
            if not math.isfinite(sigma):
                raise NonFiniteLossError(f"{conv.name}.sigma")
            if sigma != 0.0 and abs(sigma - 1.0) > tolerance:
                logger.debug("Re-converging spectral norm of %s (sigma %.4f)", conv.name, sigma)
                conv.reconverge()
                sigma = conv.normalized_sigma()
                if not math.isfinite(sigma):
                    raise NonFiniteLossError(f"{conv.name}.sigma")
                if abs(sigma - 1.0) > tolerance:
                    raise SpectralNormError(
                        f"Normalized kernel {conv.name} has spectral norm {sigma:.4f}, "
                        f"outside 1 +/- {tolerance}"
                    )
            sigmas[conv.name] = sigma
        logger.debug(
            "Spectral norms: estimates %s, normalized %s",
            {k: round(v, 4) for k, v in self.sigmas().items()},
            {k: round(v, 4) for k, v in sigmas.items()},
        )
        return sigmas


def discriminator_forward(
    clean_mag_c: Tensor | np.ndarray,
    other_mag_c: Tensor | np.ndarray,
    discriminator: Discriminator,
) -> Tensor:
    """Evaluation-mode score (dropout off, power iteration frozen)."""
    return discriminator(clean_mag_c, other_mag_c, training=False, update_sn=False)
