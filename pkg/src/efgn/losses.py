"""
Training objectives: time, magnitude, complex, phase, metric, and the weighted
generator loss, plus the discriminator objective.

Every norm is a mean over elements, so the weights do not depend on batch size
or clip length. Magnitude and complex terms live in the power-compressed domain.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Any, Mapping, NamedTuple

import numpy as np

from .autodiff import functional as F
from .autodiff.tensor import Tensor, as_tensor, tabs
from .config import dataclass_from_dict
from .dsp.audio import AudioClip
from .exceptions import ConfigError, ShapeError
from .metrics import ssnr

TWO_PI = 2.0 * np.pi
SSNR_PROXY_FLOOR = -10.0
SSNR_PROXY_SPAN = 45.0

LossInput = Tensor | np.ndarray | AudioClip


@dataclass(frozen=True)
class LossWeights:
    w_metric: float = 0.05
    w_mag: float = 0.9
    w_pha: float = 0.3
    w_com: float = 0.1
    w_time: float = 0.2

    def __post_init__(self) -> None:
        for name, value in asdict(self).items():
            if value < 0:
                raise ConfigError(f"Loss weight {name} must be >= 0, got {value}")

    def to_dict(self) -> dict[str, float]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "LossWeights":
        return dataclass_from_dict(cls, data, "loss weights")


@dataclass
class LossReport:
    l_time: float = 0.0
    l_mag: float = 0.0
    l_com: float = 0.0
    l_ip: float = 0.0
    l_gd: float = 0.0
    l_iaf: float = 0.0
    l_pha: float = 0.0
    l_metric: float = 0.0
    l_generator: float = 0.0
    l_discriminator: float = 0.0
    score_real: float = 0.0  # mean discriminator score on clean pairs
    score_fake: float = 0.0
    score_min: float = 0.0
    score_max: float = 0.0

    def to_dict(self) -> dict[str, float]:
        return asdict(self)

    def is_finite(self) -> bool:
        return all(np.isfinite(v) for v in asdict(self).values())


class PhaseLosses(NamedTuple):
    ip: Tensor
    gd: Tensor
    iaf: Tensor
    total: Tensor


def _tensor(value: LossInput, like: Tensor | None = None) -> Tensor:
    if isinstance(value, AudioClip):
        value = value.samples
    return as_tensor(value, like=like)


def _same_shape(a: Tensor, b: Tensor, what: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{what}: operands differ in shape, {a.shape} vs {b.shape}")


def time_loss(clean: LossInput, estimate: LossInput) -> Tensor:
    """Mean absolute waveform error."""
    est = _tensor(estimate)
    ref = _tensor(clean, like=est)
    _same_shape(ref, est, "time_loss")
    return F.l1_norm(ref, est)


def magnitude_loss(target_c: LossInput, estimate_c: LossInput) -> Tensor:
    """Mean squared error between compressed magnitudes."""
    est = _tensor(estimate_c)
    return F.mse(_tensor(target_c, like=est), est)


def complex_loss(
    target_real: LossInput,
    target_imag: LossInput,
    estimate_real: LossInput,
    estimate_imag: LossInput,
) -> Tensor:
    """MSE of the compressed real parts plus MSE of the compressed imaginary parts."""
    er, ei = _tensor(estimate_real), _tensor(estimate_imag)
    return F.mse(_tensor(target_real, like=er), er) + F.mse(_tensor(target_imag, like=ei), ei)


def round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def anti_wrap(delta: Tensor | np.ndarray) -> Tensor:
    """|delta - 2 pi round(delta / 2 pi)|, ties rounded away from zero."""
    d = as_tensor(delta)
    turns = round_half_away(d.data / TWO_PI)
    return tabs(d - as_tensor(TWO_PI * turns, like=d))


def _diff(x: Tensor, axis: int) -> Tensor:
    ax = axis % x.ndim
    head = [slice(None)] * x.ndim
    tail = [slice(None)] * x.ndim
    head[ax] = slice(1, None)
    tail[ax] = slice(None, -1)
    return x[tuple(head)] - x[tuple(tail)]


def phase_loss(
    target: LossInput,
    estimate: LossInput,
    time_axis: int = -2,
    freq_axis: int = -1,
) -> PhaseLosses:
    """
    Instantaneous-phase, group-delay and instantaneous-angular-frequency losses.

    Group delay differences along the frequency axis, angular frequency along
    the time axis. Grids default to the [..., T, F] network layout.
    """
    est = _tensor(estimate)
    ref = _tensor(target, like=est)
    _same_shape(ref, est, "phase_loss")
    if ref.ndim < 2 or ref.shape[time_axis] < 2 or ref.shape[freq_axis] < 2:
        raise ShapeError(f"phase_loss needs at least 2 frames and 2 bins, got {ref.shape}")
    ip = anti_wrap(ref - est).mean()
    gd = anti_wrap(_diff(ref, freq_axis) - _diff(est, freq_axis)).mean()
    iaf = anti_wrap(_diff(ref, time_axis) - _diff(est, time_axis)).mean()
    return PhaseLosses(ip, gd, iaf, ip + gd + iaf)


def metric_loss(scores: Tensor | np.ndarray) -> Tensor:
    """Mean squared distance of discriminator scores from 1."""
    s = as_tensor(scores)
    diff = s - 1.0
    return (diff * diff).mean()


def generator_loss(
    l_metric: Tensor | float,
    l_mag: Tensor | float,
    l_pha: Tensor | float,
    l_com: Tensor | float,
    l_time: Tensor | float,
    weights: LossWeights | None = None,
) -> Tensor:
    w = weights or LossWeights()
    terms = [
        (w.w_metric, l_metric),
        (w.w_mag, l_mag),
        (w.w_pha, l_pha),
        (w.w_com, l_com),
        (w.w_time, l_time),
    ]
    total: Tensor | float = 0.0
    for weight, term in terms:
        total = total + term * weight
    return as_tensor(total)


def discriminator_loss(
    score_real: Tensor | np.ndarray,
    score_fake: Tensor | np.ndarray,
    label_fake: float | np.ndarray = 0.0,
) -> Tensor:
    """mean((real - 1)^2) + mean((fake - label)^2)."""
    real = as_tensor(score_real)
    fake = as_tensor(score_fake)
    r = real - 1.0
    f = fake - as_tensor(np.asarray(label_fake, dtype=fake.dtype), like=fake)
    return (r * r).mean() + (f * f).mean()


def metric_proxy_label(clean: AudioClip, enhanced: AudioClip) -> float:
    """SSNR-based quality label in [0, 1]; an exact copy of the clean clip scores 1."""
    value = (ssnr(clean, enhanced) - SSNR_PROXY_FLOOR) / SSNR_PROXY_SPAN
    return float(np.clip(value, 0.0, 1.0))


def report_from_terms(
    l_time: Tensor,
    l_mag: Tensor,
    l_com: Tensor,
    phase: PhaseLosses,
    l_metric: Tensor,
    l_generator: Tensor,
) -> LossReport:
    return LossReport(
        l_time=l_time.item(),
        l_mag=l_mag.item(),
        l_com=l_com.item(),
        l_ip=phase.ip.item(),
        l_gd=phase.gd.item(),
        l_iaf=phase.iaf.item(),
        l_pha=phase.total.item(),
        l_metric=l_metric.item(),
        l_generator=l_generator.item(),
    )
