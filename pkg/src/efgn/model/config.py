"""Generator and discriminator hyperparameters with micro, desk and full-size presets."""
from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from typing import Any, Mapping

from ..autodiff.functional import conv_output_extent
from ..config import dataclass_from_dict
from ..exceptions import ConfigError

DENSE_DILATIONS = (1, 2, 4, 8)


@dataclass(frozen=True)
class GeneratorConfig:
    """Generator layout. ``use_depthwise`` / ``use_residual_attention`` are the ablation switches."""

    # Trunk
    base_channels: int = 16
    num_ts_blocks: int = 2
    heads: int = 4
    kernel: tuple[int, int] = (3, 3)
    dilations: tuple[int, ...] = DENSE_DILATIONS
    conformer_kernel: int = 31

    # Mask head
    compression: float = 0.3
    mask_beta: float = 1.2

    # Ablations
    use_depthwise: bool = True
    use_residual_attention: bool = True

    # Framing
    n_fft: int = 400
    hop: int = 100
    window: str = "hann"

    @classmethod
    def desk(cls, **overrides: Any) -> "GeneratorConfig":
        return replace(cls(), **overrides)

    @classmethod
    def full(cls, **overrides: Any) -> "GeneratorConfig":
        return replace(cls(base_channels=64, num_ts_blocks=4), **overrides)

    @classmethod
    def micro(cls, **overrides: Any) -> "GeneratorConfig":
        """Tiny layout for finite-difference checks (F = 9 bins)."""
        return replace(
            cls(base_channels=4, num_ts_blocks=1, heads=2, conformer_kernel=3, n_fft=16, hop=4),
            **overrides,
        )

    @property
    def num_bins(self) -> int:
        return self.n_fft // 2 + 1

    def encoded_bins(self, bins: int | None = None) -> int:
        """Frequency extent after the stride-2 downsampling block."""
        return conv_output_extent(bins or self.num_bins, self.kernel[1], 2, 1, self.kernel[1] // 2)

    def validate(self) -> "GeneratorConfig":
        if self.base_channels < 1:
            raise ConfigError(f"base_channels must be positive, got {self.base_channels}")
        if self.heads < 1 or self.base_channels % self.heads:
            raise ConfigError(
                f"base_channels ({self.base_channels}) must be divisible by heads ({self.heads})"
            )
        if self.num_ts_blocks < 0:
            raise ConfigError("num_ts_blocks must be >= 0")
        if tuple(self.dilations) != DENSE_DILATIONS:
            raise ConfigError(f"Dense dilations must be {list(DENSE_DILATIONS)}, got {list(self.dilations)}")
        if any(k < 1 or k % 2 == 0 for k in self.kernel):
            raise ConfigError(f"Kernel extents must be odd and positive, got {self.kernel}")
        if self.conformer_kernel < 1 or self.conformer_kernel % 2 == 0:
            raise ConfigError(f"conformer_kernel must be odd, got {self.conformer_kernel}")
        if not 0.0 < self.compression <= 1.0:
            raise ConfigError(f"compression must be in (0, 1], got {self.compression}")
        if self.mask_beta <= 0:
            raise ConfigError(f"mask_beta must be positive, got {self.mask_beta}")
        if self.n_fft < 2 or self.n_fft % 2:
            raise ConfigError(f"n_fft must be even, got {self.n_fft}")
        if not 0 < self.hop <= self.n_fft:
            raise ConfigError(f"hop must be in (0, n_fft], got {self.hop}")
        return self

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "GeneratorConfig":
        return dataclass_from_dict(cls, data, "generator config").validate()


@dataclass(frozen=True)
class DiscriminatorConfig:
    channels: tuple[int, ...] = (8, 16, 32, 64)
    kernel: tuple[int, int] = (3, 3)
    stride: tuple[int, int] = (2, 2)
    pooled: tuple[int, int] = (4, 4)
    hidden: int = 64
    dropout: float = 0.3
    sn_iters: int = 1
    output_beta: float = 1.0

    @classmethod
    def desk(cls, **overrides: Any) -> "DiscriminatorConfig":
        return replace(cls(), **overrides)

    @classmethod
    def micro(cls, **overrides: Any) -> "DiscriminatorConfig":
        return replace(cls(channels=(2, 4), pooled=(1, 1), hidden=4), **overrides)

    def output_extent(self, frames: int, bins: int) -> tuple[int, int]:
        """(T, F) after the strided conv stack."""
        t, f = frames, bins
        for _ in self.channels:
            t = conv_output_extent(t, self.kernel[0], self.stride[0], 1, self.kernel[0] // 2)
            f = conv_output_extent(f, self.kernel[1], self.stride[1], 1, self.kernel[1] // 2)
        return t, f

    def validate(self) -> "DiscriminatorConfig":
        if len(self.channels) < 2:
            raise ConfigError("The discriminator needs at least two conv stages")
        if any(c < 1 for c in self.channels) or self.hidden < 1:
            raise ConfigError("Channel counts and hidden width must be positive")
        if min(self.pooled) < 1:
            raise ConfigError(f"Pooled grid must be positive, got {self.pooled}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.sn_iters < 1:
            raise ConfigError("sn_iters must be >= 1")
        return self

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "DiscriminatorConfig":
        return dataclass_from_dict(cls, data, "discriminator config").validate()
