"""
Generator: dense encoder, two-stage conformer stack, and parallel mask/phase decoders.

Network tensors are laid out [B, C, T, F]; decoder outputs are [B, T, F].
"""
from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from ..autodiff import functional as F
from ..autodiff.layers import Conv2d, InstanceNorm2d, LearnableSigmoid, PReLU, make_conv
from ..autodiff.params import ModelParams
from ..autodiff.tensor import Tensor, atan2, concat, cos, no_grad, reshape, sin
from ..dsp.audio import AudioClip
from ..dsp.stft import istft_tensor, power_compress, power_decompress, stft_frames
from ..exceptions import ShapeError
from ..logging_utils import get_logger
from .conformer import TSConformer
from .config import GeneratorConfig

logger = get_logger(__name__)

GENERATOR_PREFIX = "generator"


def receptive_field(kernel_t: int, dilations: Sequence[int]) -> int:
    """Time-axis receptive field (frames) of stacked dilated convolutions."""
    return 1 + (kernel_t - 1) * sum(dilations)


class ConvBlock:
    """Convolution (depthwise-separable unless disabled), instance norm, PReLU."""

    def __init__(
        self,
        params: ModelParams,
        name: str,
        in_channels: int,
        out_channels: int,
        cfg: GeneratorConfig,
        stride: tuple[int, int] = (1, 1),
        dilation: tuple[int, int] = (1, 1),
        rng: np.random.Generator | None = None,
    ):
        kt, kf = cfg.kernel
        padding = (dilation[0] * (kt // 2), dilation[1] * (kf // 2))
        self.conv = make_conv(
            cfg.use_depthwise, params, f"{name}.conv", in_channels, out_channels,
            cfg.kernel, stride=stride, dilation=dilation, padding=padding, rng=rng,
        )
        self.norm = InstanceNorm2d(params, f"{name}.norm", out_channels)
        self.act = PReLU(params, f"{name}.act", out_channels)

    def __call__(self, x: Tensor) -> Tensor:
        return self.act(self.norm(self.conv(x)))


class DilatedDenseBlock:
    """
    Four densely connected conv blocks with time dilations 1, 2, 4, 8.

    Layer i sees the block input concatenated with every earlier layer output
    ((i + 1) * C channels) and emits C channels; the last output is returned.
    """

    def __init__(
        self,
        params: ModelParams,
        name: str,
        cfg: GeneratorConfig,
        rng: np.random.Generator | None = None,
    ):
        C = cfg.base_channels
        self.layers = [
            ConvBlock(params, f"{name}.{i}", (i + 1) * C, C, cfg, dilation=(d, 1), rng=rng)
            for i, d in enumerate(cfg.dilations)
        ]

    def __call__(self, x: Tensor) -> Tensor:
        features = [x]
        out = x
        for layer in self.layers:
            out = layer(concat(features, axis=1))
            features.append(out)
        return out


class DenseEncoder:
    """[B, 2, T, F] -> [B, C, T, F'] with F' = ceil(F / 2)."""

    def __init__(
        self,
        params: ModelParams,
        name: str,
        cfg: GeneratorConfig,
        rng: np.random.Generator | None = None,
    ):
        C = cfg.base_channels
        self.initial = ConvBlock(params, f"{name}.initial", 2, C, cfg, rng=rng)
        self.dense = DilatedDenseBlock(params, f"{name}.dense", cfg, rng)
        self.downsample = ConvBlock(params, f"{name}.downsample", C, C, cfg, stride=(1, 2), rng=rng)

    def __call__(self, x: Tensor) -> Tensor:
        if x.ndim != 4 or x.shape[1] != 2:
            raise ShapeError(f"Encoder input must be [B, 2, T, F], got {x.shape}")
        return self.downsample(self.dense(self.initial(x)))


class UpsampleBlock:
    """Nearest x2 along frequency, crop to the target bin count, conv block."""

    def __init__(
        self,
        params: ModelParams,
        name: str,
        cfg: GeneratorConfig,
        rng: np.random.Generator | None = None,
    ):
        self.block = ConvBlock(params, name, cfg.base_channels, cfg.base_channels, cfg, rng=rng)

    def __call__(self, z: Tensor, bins: int) -> Tensor:
        up = F.upsample_nearest(z, 2, axis=-1)
        if up.shape[-1] < bins:
            raise ShapeError(f"Cannot restore {bins} bins from {z.shape[-1]} encoded bins")
        if up.shape[-1] > bins:
            up = up[..., :bins]
        return self.block(up)


class MaskDecoder:
    def __init__(
        self,
        params: ModelParams,
        name: str,
        cfg: GeneratorConfig,
        rng: np.random.Generator | None = None,
    ):
        self.upsample = UpsampleBlock(params, f"{name}.upsample", cfg, rng)
        self.head = Conv2d(params, f"{name}.head", cfg.base_channels, 1, (1, 1), rng=rng)
        self.lsigmoid = LearnableSigmoid(params, f"{name}.lsigmoid", cfg.num_bins, cfg.mask_beta)

    def __call__(self, z: Tensor, bins: int) -> Tensor:
        """Mask over [B, T, F], each value in (0, beta)."""
        h = self.head(self.upsample(z, bins))
        B, _, T, Fb = h.shape
        return self.lsigmoid(reshape(h, (B, T, Fb)))


class PhaseDecoder:
    def __init__(
        self,
        params: ModelParams,
        name: str,
        cfg: GeneratorConfig,
        rng: np.random.Generator | None = None,
    ):
        self.upsample = UpsampleBlock(params, f"{name}.upsample", cfg, rng)
        self.real = Conv2d(params, f"{name}.real", cfg.base_channels, 1, (1, 1), rng=rng)
        self.imag = Conv2d(params, f"{name}.imag", cfg.base_channels, 1, (1, 1), rng=rng)

    def __call__(self, z: Tensor, bins: int) -> Tensor:
        """Phase over [B, T, F] in (-pi, pi] from pseudo real/imaginary parts."""
        h = self.upsample(z, bins)
        B, _, T, Fb = h.shape
        real = reshape(self.real(h), (B, T, Fb))
        imag = reshape(self.imag(h), (B, T, Fb))
        return atan2(imag, real)


def apply_mask(mask: Tensor, noisy_mag_c: Tensor, c: float) -> tuple[Tensor, Tensor]:
    """Masked magnitude in the compressed domain and after decompression."""
    if mask.shape != noisy_mag_c.shape:
        raise ShapeError(f"Mask {mask.shape} does not match magnitude {noisy_mag_c.shape}")
    est_mag_c = mask * noisy_mag_c
    return est_mag_c, power_decompress(est_mag_c, c)


@dataclass
class GeneratorOutput:
    """Everything one generator pass produces; grids are [B, T, F]."""

    mask: Tensor
    magnitude_c: Tensor
    magnitude: Tensor
    phase: Tensor
    real_c: Tensor
    imag_c: Tensor
    waveform: Tensor | None = None


class Enhancement(NamedTuple):
    enhanced: AudioClip
    magnitude: np.ndarray  # [F, T]
    phase: np.ndarray  # [F, T]
    mask: np.ndarray  # [F, T]


class Generator:
    def __init__(
        self,
        cfg: GeneratorConfig,
        params: ModelParams | None = None,
        rng: np.random.Generator | None = None,
        prefix: str = GENERATOR_PREFIX,
    ):
        self.cfg = cfg.validate()
        self.params = params if params is not None else ModelParams()
        self.prefix = prefix
        rng = rng or np.random.default_rng(0)
        self.encoder = DenseEncoder(self.params, f"{prefix}.encoder", cfg, rng)
        self.ts_conformer = TSConformer(self.params, f"{prefix}.ts", cfg, rng)
        self.mask_decoder = MaskDecoder(self.params, f"{prefix}.mask_decoder", cfg, rng)
        self.phase_decoder = PhaseDecoder(self.params, f"{prefix}.phase_decoder", cfg, rng)
        logger.debug("Built %s with %d parameters", prefix, sum(p.size for p in self.params.select(prefix)))

    def forward_features(
        self,
        noisy_mag: np.ndarray,
        noisy_phase: np.ndarray,
        length: int | None = None,
    ) -> GeneratorOutput:
        """
        Run the network on [B, T, F] noisy magnitude and phase grids.

        Args:
            noisy_mag: Uncompressed noisy magnitude
            noisy_phase: Noisy phase in radians
            length: When given, also synthesize the [B, length] waveform
        """
        if noisy_mag.shape != noisy_phase.shape or noisy_mag.ndim != 3:
            raise ShapeError(
                f"Expected matching [B, T, F] grids, got {noisy_mag.shape} and {noisy_phase.shape}"
            )
        cfg = self.cfg
        dtype = self.params.dtype
        bins = noisy_mag.shape[-1]
        noisy_mag_c = Tensor(power_compress(noisy_mag, cfg.compression), dtype=dtype)
        features = Tensor(np.stack([noisy_mag_c.data, noisy_phase.astype(dtype)], axis=1))

        z = self.ts_conformer(self.encoder(features))
        mask = self.mask_decoder(z, bins)
        phase = self.phase_decoder(z, bins)
        est_mag_c, est_mag = apply_mask(mask, noisy_mag_c, cfg.compression)
        cos_p, sin_p = cos(phase), sin(phase)

        waveform = None
        if length is not None:
            waveform = istft_tensor(
                est_mag * cos_p, est_mag * sin_p, length, cfg.n_fft, cfg.hop, cfg.window
            )
        return GeneratorOutput(
            mask=mask,
            magnitude_c=est_mag_c,
            magnitude=est_mag,
            phase=phase,
            real_c=est_mag_c * cos_p,
            imag_c=est_mag_c * sin_p,
            waveform=waveform,
        )

    def __call__(self, noisy: np.ndarray) -> GeneratorOutput:
        """Enhance a [B, L] batch of waveforms."""
        cfg = self.cfg
        spec = stft_frames(noisy, cfg.n_fft, cfg.hop, cfg.window)
        return self.forward_features(np.abs(spec), np.angle(spec), noisy.shape[-1])


def generator_forward(noisy: AudioClip, generator: Generator) -> Enhancement:
    """Inference pass on one clip; the enhanced clip has the input's length."""
    with no_grad():
        out = generator(noisy.samples[None, :])
    assert out.waveform is not None
    enhanced = np.asarray(out.waveform.data[0], dtype=np.float64)
    return Enhancement(
        enhanced=AudioClip(enhanced, noisy.sample_rate),
        magnitude=out.magnitude.data[0].T.copy(),
        phase=out.phase.data[0].T.copy(),
        mask=out.mask.data[0].T.copy(),
    )


def param_breakdown(params: ModelParams, depth: int = 2, effective: bool = False) -> dict[str, int]:
    """Parameter counts grouped by the first ``depth`` name segments."""
    groups: OrderedDict[str, int] = OrderedDict()
    for p in params:
        key = ".".join(p.name.split(".")[:depth])
        count = int(np.count_nonzero(p.mask)) if effective and p.mask is not None else p.size
        groups[key] = groups.get(key, 0) + count
    return dict(groups)
