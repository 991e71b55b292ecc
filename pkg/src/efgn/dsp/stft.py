"""
STFT front end and ISTFT back end of the enhancement pipeline.

Framing follows the centered convention: the signal is reflect-padded by
n_fft/2 on both sides, so a clip of L samples yields floor(L/hop) + 1 frames.
Spectrogram grids are stored [F, T]; batched helpers work on [..., T, F].
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import overload

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import get_window

from ..autodiff.tensor import Tensor, make_result
from ..exceptions import ConfigError, ShapeError, StftError
from .audio import AudioClip

DEFAULT_N_FFT = 400
DEFAULT_HOP = 100
DEFAULT_WINDOW = "hann"
DEFAULT_COMPRESSION = 0.3
COLA_FLOOR = 1e-8

_WINDOW_ALIASES = {"rectangular": "boxcar", "rect": "boxcar", "hanning": "hann"}


@lru_cache(maxsize=16)
def make_window(name: str, n_fft: int) -> np.ndarray:
    """Periodic analysis window (read-only, cached)."""
    window = get_window(_WINDOW_ALIASES.get(name, name), n_fft, fftbins=True).astype(np.float64)
    window.setflags(write=False)
    return window


@dataclass
class Spectrogram:
    """Magnitude and phase grids of shape [F, T] plus the framing that produced them."""

    magnitude: np.ndarray
    phase: np.ndarray
    n_fft: int = DEFAULT_N_FFT
    hop: int = DEFAULT_HOP
    sample_rate: int = 16000
    length: int | None = None
    window: str = DEFAULT_WINDOW

    def __post_init__(self) -> None:
        if self.magnitude.shape != self.phase.shape:
            raise ShapeError(
                f"Magnitude {self.magnitude.shape} and phase {self.phase.shape} differ"
            )
        if self.magnitude.shape[0] != self.n_fft // 2 + 1:
            raise ShapeError(
                f"Expected {self.n_fft // 2 + 1} frequency bins, got {self.magnitude.shape[0]}"
            )

    @property
    def num_bins(self) -> int:
        return self.magnitude.shape[0]

    @property
    def num_frames(self) -> int:
        return self.magnitude.shape[1]

    def to_complex(self) -> np.ndarray:
        return self.magnitude * np.exp(1j * self.phase)


@dataclass
class FeatureMap:
    """[B, 2, T, F]: compressed magnitude in channel 0, phase in channel 1."""

    tensor: np.ndarray

    def __post_init__(self) -> None:
        if self.tensor.ndim != 4 or self.tensor.shape[1] != 2:
            raise ShapeError(f"FeatureMap must be [B, 2, T, F], got {self.tensor.shape}")


# ---------------------------------------------------------------------------
# analysis
# ---------------------------------------------------------------------------
def stft_frames(
    samples: np.ndarray,
    n_fft: int = DEFAULT_N_FFT,
    hop: int = DEFAULT_HOP,
    window: str = DEFAULT_WINDOW,
) -> np.ndarray:
    """Complex STFT of [..., L] samples, returned as [..., T, F]."""
    if n_fft < 2 or n_fft % 2:
        raise StftError(f"n_fft must be even, got {n_fft}")
    if not 0 < hop <= n_fft:
        raise StftError(f"hop must be in (0, n_fft], got hop={hop}, n_fft={n_fft}")
    length = samples.shape[-1]
    if length < hop:
        raise StftError(f"Clip of {length} samples is shorter than one hop ({hop})")
    half = n_fft // 2
    widths = [(0, 0)] * (samples.ndim - 1) + [(half, half)]
    padded = np.pad(samples, widths, mode="reflect")
    frames = sliding_window_view(padded, n_fft, axis=-1)[..., ::hop, :]
    frames = frames[..., : length // hop + 1, :]
    return np.fft.rfft(frames * make_window(window, n_fft), axis=-1)


def stft(
    clip: AudioClip,
    n_fft: int = DEFAULT_N_FFT,
    hop: int = DEFAULT_HOP,
    window: str = DEFAULT_WINDOW,
) -> Spectrogram:
    spec = stft_frames(clip.samples, n_fft, hop, window).T  # [F, T]
    return Spectrogram(
        magnitude=np.abs(spec),
        phase=np.angle(spec),
        n_fft=n_fft,
        hop=hop,
        sample_rate=clip.sample_rate,
        length=len(clip),
        window=window,
    )


# ---------------------------------------------------------------------------
# synthesis
# ---------------------------------------------------------------------------
def _ola_layout(frames: int, n_fft: int, hop: int, length: int) -> tuple[int, int]:
    total = max(n_fft + hop * (frames - 1), n_fft // 2 + length)
    return total, n_fft // 2


def _window_envelope(window: str, frames: int, n_fft: int, hop: int, length: int) -> np.ndarray:
    w = make_window(window, n_fft)
    total, start = _ola_layout(frames, n_fft, hop, length)
    env = np.zeros(total)
    for t in range(frames):
        env[t * hop: t * hop + n_fft] += w * w
    region = env[start: start + length]
    if region.size == 0 or region.min() < COLA_FLOOR:
        raise StftError(
            f"Window '{window}' with n_fft={n_fft}, hop={hop} violates the overlap-add condition"
        )
    return region


def _overlap_add(frames: np.ndarray, hop: int, total: int) -> np.ndarray:
    n_fft = frames.shape[-1]
    out = np.zeros(frames.shape[:-2] + (total,), dtype=frames.dtype)
    for t in range(frames.shape[-2]):
        out[..., t * hop: t * hop + n_fft] += frames[..., t, :]
    return out


def istft_frames(
    spec: np.ndarray,
    length: int,
    n_fft: int = DEFAULT_N_FFT,
    hop: int = DEFAULT_HOP,
    window: str = DEFAULT_WINDOW,
) -> np.ndarray:
    """Weighted overlap-add inverse of :func:`stft_frames` for [..., T, F] input."""
    frames_count = spec.shape[-2]
    env = _window_envelope(window, frames_count, n_fft, hop, length)
    frames = np.fft.irfft(spec, n=n_fft, axis=-1) * make_window(window, n_fft)
    total, start = _ola_layout(frames_count, n_fft, hop, length)
    signal = _overlap_add(frames, hop, total)
    return signal[..., start: start + length] / env


def istft(
    spec: Spectrogram,
    n_fft: int | None = None,
    hop: int | None = None,
    window: str | None = None,
    length: int | None = None,
) -> AudioClip:
    n_fft = n_fft or spec.n_fft
    hop = hop or spec.hop
    window = window or spec.window
    if length is None:
        length = spec.length if spec.length is not None else hop * (spec.num_frames - 1)
    samples = istft_frames(spec.to_complex().T, length, n_fft, hop, window)
    return AudioClip(samples, spec.sample_rate)


def istft_tensor(
    real: Tensor,
    imag: Tensor,
    length: int,
    n_fft: int = DEFAULT_N_FFT,
    hop: int = DEFAULT_HOP,
    window: str = DEFAULT_WINDOW,
) -> Tensor:
    """
    Differentiable ISTFT of real/imaginary grids [..., T, F] into [..., length].

    The map is linear, so the backward pass is its adjoint: frame the incoming
    gradient, window it, and take a scaled real FFT.
    """
    if real.shape != imag.shape:
        raise ShapeError(f"Real {real.shape} and imaginary {imag.shape} parts differ")
    frames_count = real.shape[-2]
    env = _window_envelope(window, frames_count, n_fft, hop, length)
    w = make_window(window, n_fft)
    total, start = _ola_layout(frames_count, n_fft, hop, length)

    frames = np.fft.irfft(real.data + 1j * imag.data, n=n_fft, axis=-1) * w
    out = (_overlap_add(frames, hop, total)[..., start: start + length] / env).astype(real.dtype)

    bins = n_fft // 2 + 1
    scale = np.full(bins, 2.0 / n_fft)
    scale[0] = 1.0 / n_fft
    if n_fft % 2 == 0:
        scale[-1] = 1.0 / n_fft

    def _backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        g_full = np.zeros(g.shape[:-1] + (total,))
        g_full[..., start: start + length] = g / env
        g_frames = sliding_window_view(g_full, n_fft, axis=-1)[..., ::hop, :][..., :frames_count, :]
        spectrum = np.fft.rfft(g_frames * w, axis=-1) * scale
        return spectrum.real, spectrum.imag

    return make_result("istft", out, (real, imag), _backward)


# ---------------------------------------------------------------------------
# compression and feature stacking
# ---------------------------------------------------------------------------
def _check_factor(c: float) -> None:
    if not 0.0 < c <= 1.0:
        raise ConfigError(f"Compression factor must be in (0, 1], got {c}")


@overload
def power_compress(mag: Tensor, c: float = ...) -> Tensor: ...
@overload
def power_compress(mag: np.ndarray, c: float = ...) -> np.ndarray: ...
def power_compress(mag, c=DEFAULT_COMPRESSION):  # type: ignore[no-untyped-def]
    """Elementwise ``mag ** c`` for nonnegative magnitudes."""
    _check_factor(c)
    data = mag.data if isinstance(mag, Tensor) else np.asarray(mag)
    if np.any(data < 0):
        raise StftError("power_compress expects nonnegative magnitudes")
    return mag ** c if isinstance(mag, Tensor) else np.power(data, c)


@overload
def power_decompress(mag: Tensor, c: float = ...) -> Tensor: ...
@overload
def power_decompress(mag: np.ndarray, c: float = ...) -> np.ndarray: ...
def power_decompress(mag, c=DEFAULT_COMPRESSION):  # type: ignore[no-untyped-def]
    """Elementwise ``mag ** (1/c)``, the inverse of :func:`power_compress`."""
    _check_factor(c)
    data = mag.data if isinstance(mag, Tensor) else np.asarray(mag)
    if np.any(data < 0):
        raise StftError("power_decompress expects nonnegative magnitudes")
    return mag ** (1.0 / c) if isinstance(mag, Tensor) else np.power(data, 1.0 / c)


def stack_features(mag_c: np.ndarray, phase: np.ndarray) -> FeatureMap:
    """Stack [F, T] (or [B, F, T]) grids into a [B, 2, T, F] feature map."""
    if mag_c.shape != phase.shape:
        raise ShapeError(f"Magnitude {mag_c.shape} and phase {phase.shape} differ")
    if mag_c.ndim == 2:
        mag_c, phase = mag_c[None], phase[None]
    if mag_c.ndim != 3:
        raise ShapeError(f"Expected [F, T] or [B, F, T] grids, got {mag_c.shape}")
    stacked = np.stack([mag_c, phase], axis=1)  # [B, 2, F, T]
    return FeatureMap(np.ascontiguousarray(stacked.transpose(0, 1, 3, 2)))


def unstack_features(features: FeatureMap) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`stack_features` for a single item: two [F, T] grids."""
    grid = features.tensor[0]
    return grid[0].T.copy(), grid[1].T.copy()
