"""Training configuration, JSON loading, and the ablation presets."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
import json
import math
from pathlib import Path
from typing import Any, Literal, Mapping

import numpy as np

from ..config import Settings, dataclass_from_dict
from ..exceptions import ConfigError
from ..logging_utils import get_logger
from ..losses import LossWeights
from ..model.config import DiscriminatorConfig, GeneratorConfig

logger = get_logger(__name__)

ABLATION_PRESETS = ("baseline", "no-depthwise", "no-res", "no-prune")
NOISE_KINDS = ("white", "pink", "band")


@dataclass(frozen=True)
class OptimizerConfig:
    lr_generator: float = 5e-4
    lr_discriminator: float = 1e-3
    betas: tuple[float, float] = (0.8, 0.99)
    eps: float = 1e-8
    weight_decay: float = 1e-4
    clip_norm: float = 5.0

    def validate(self) -> "OptimizerConfig":
        if self.lr_generator <= 0 or self.lr_discriminator <= 0:
            raise ConfigError("Learning rates must be positive")
        if not all(0.0 <= b < 1.0 for b in self.betas):
            raise ConfigError(f"betas must be in [0, 1), got {self.betas}")
        if self.weight_decay < 0 or self.clip_norm < 0:
            raise ConfigError("weight_decay and clip_norm must be >= 0")
        return self


@dataclass(frozen=True)
class PruneSchedule:
    """
    When pruning happens. ``epoch`` is 1-based; None means ceil(epochs / 2).

    "one-shot" prunes the full amount once; "iterative" spreads it over
    ``steps`` consecutive epochs.
    """

    amount: float = 0.3
    mode: Literal["one-shot", "iterative"] = "one-shot"
    epoch: int | None = None
    steps: int = 3

    def validate(self) -> "PruneSchedule":
        if not 0.0 <= self.amount < 1.0:
            raise ConfigError(f"Prune amount must be in [0, 1), got {self.amount}")
        if self.mode not in ("one-shot", "iterative"):
            raise ConfigError(f"Unknown prune mode '{self.mode}'")
        if self.epoch is not None and self.epoch < 1:
            raise ConfigError("Prune epoch is 1-based")
        if self.steps < 1:
            raise ConfigError("Iterative pruning needs at least one step")
        return self

    def start_epoch(self, epochs: int) -> int:
        return self.epoch if self.epoch is not None else max(1, math.ceil(epochs / 2))

    def targets(self, epochs: int) -> dict[int, float]:
        """Cumulative prune amount to reach at the start of each listed epoch."""
        start = self.start_epoch(epochs)
        if start > epochs:
            return {}
        if self.mode == "one-shot":
            return {start: self.amount}
        plan: dict[int, float] = {}
        for i in range(self.steps):
            plan[min(start + i, epochs)] = self.amount * (i + 1) / self.steps
        return plan


@dataclass(frozen=True)
class SynthDatasetSpec:
    num_clips: int = 200
    clip_seconds: float = 1.0
    sample_rate: int = 16000
    snr_levels: tuple[float, ...] = (2.5, 7.5, 12.5, 17.5)
    f0_range: tuple[float, float] = (150.0, 300.0)
    noise_kinds: tuple[str, ...] = NOISE_KINDS
    heldout_fraction: float = 0.1
    seed: int = 1234

    def validate(self) -> "SynthDatasetSpec":
        if self.num_clips < 1 or self.clip_seconds <= 0:
            raise ConfigError("num_clips and clip_seconds must be positive")
        if not self.snr_levels:
            raise ConfigError("At least one SNR level is required")
        unknown = set(self.noise_kinds) - set(NOISE_KINDS)
        if unknown or not self.noise_kinds:
            raise ConfigError(f"Unknown noise kinds: {sorted(unknown)}")
        lo, hi = self.f0_range
        if not 0 < lo <= hi < self.sample_rate / 2:
            raise ConfigError(f"Invalid f0 range {self.f0_range}")
        if not 0.0 <= self.heldout_fraction < 1.0:
            raise ConfigError("heldout_fraction must be in [0, 1)")
        return self

    @property
    def clip_samples(self) -> int:
        return int(round(self.clip_seconds * self.sample_rate))

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SynthDatasetSpec":
        return dataclass_from_dict(cls, data, "dataset").validate()


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 5
    batch_size: int = 4
    seed: int = 0
    dtype: str = "float32"
    use_pruning: bool = True
    label_mode: Literal["adversarial", "metric-proxy"] = "adversarial"
    eval_every: int = 1
    dataset_dir: str | None = None
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    discriminator: DiscriminatorConfig = field(default_factory=DiscriminatorConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    prune: PruneSchedule = field(default_factory=PruneSchedule)
    loss_weights: LossWeights = field(default_factory=LossWeights)
    dataset: SynthDatasetSpec = field(default_factory=SynthDatasetSpec)

    @property
    def use_depthwise(self) -> bool:
        return self.generator.use_depthwise

    @property
    def use_residual_attention(self) -> bool:
        return self.generator.use_residual_attention

    def validate(self) -> "TrainConfig":
        if self.epochs < 1 or self.batch_size < 1 or self.eval_every < 1:
            raise ConfigError("epochs, batch_size and eval_every must be positive")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"dtype must be float32 or float64, got {self.dtype}")
        if self.label_mode not in ("adversarial", "metric-proxy"):
            raise ConfigError(f"Unknown label_mode '{self.label_mode}'")
        self.generator.validate()
        self.discriminator.validate()
        self.optimizer.validate()
        self.prune.validate()
        self.dataset.validate()
        self._check_discriminator_fits()
        return self

    def min_clip_samples(self) -> int:
        """Shortest clip whose spectrogram still covers the discriminator's pooled grid in time."""
        g, d = self.generator, self.discriminator
        frames = 2
        while d.output_extent(frames, g.num_bins)[0] < d.pooled[0]:
            frames += 1
        return (frames - 1) * g.hop

    def _check_discriminator_fits(self) -> None:
        g, d = self.generator, self.discriminator
        bins = d.output_extent(1, g.num_bins)[1]
        if bins < d.pooled[1]:
            raise ConfigError(
                f"n_fft {g.n_fft} leaves {bins} discriminator bins, fewer than the pooled grid {d.pooled}"
            )
        if self.dataset_dir:
            return
        shortest = self.min_clip_samples()
        if self.dataset.clip_samples < shortest:
            seconds = math.ceil(1000 * shortest / self.dataset.sample_rate) / 1000
            raise ConfigError(
                f"clip_seconds {self.dataset.clip_seconds} is too short for the discriminator's "
                f"pooled grid {d.pooled}; clips need at least {seconds:g} s ({shortest} samples)"
            )

    @property
    def np_dtype(self) -> np.dtype:
        return np.dtype(self.dtype)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TrainConfig":
        sections = {
            "generator": GeneratorConfig,
            "discriminator": DiscriminatorConfig,
            "optimizer": OptimizerConfig,
            "prune": PruneSchedule,
            "loss_weights": LossWeights,
            "dataset": SynthDatasetSpec,
        }
        flat = {k: v for k, v in data.items() if k not in sections}
        nested = {
            key: dataclass_from_dict(section, data[key], key)
            for key, section in sections.items()
            if key in data
        }
        return dataclass_from_dict(cls, {**flat, **nested}).validate()


def apply_ablation(cfg: TrainConfig, preset: str) -> TrainConfig:
    """Return ``cfg`` with one ablation preset's switches applied."""
    if preset == "baseline":
        return cfg
    if preset == "no-depthwise":
        return replace(cfg, generator=replace(cfg.generator, use_depthwise=False))
    if preset == "no-res":
        return replace(cfg, generator=replace(cfg.generator, use_residual_attention=False))
    if preset == "no-prune":
        return replace(cfg, use_pruning=False)
    raise ConfigError(f"Unknown ablation preset '{preset}'; expected one of {', '.join(ABLATION_PRESETS)}")


def load_train_config(path: str | Path | None = None, settings: Settings | None = None) -> TrainConfig:
    """
    Read a JSON training config; EFGN_SEED (via ``settings``) overrides the seed.

    Raises:
        ConfigError: If the file is missing, not valid JSON, or has unknown keys
    """
    data: Mapping[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"Config file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"Invalid JSON in {path}: {e}") from e
    cfg = TrainConfig.from_dict(data)
    settings = settings or Settings.from_env()
    if settings.seed is not None:
        logger.info("Seed overridden by EFGN_SEED: %d", settings.seed)
        cfg = replace(cfg, seed=settings.seed)
    return cfg
