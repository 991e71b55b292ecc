from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from ..exceptions import AudioError, AudioFormatError, SilentClipError
from ..logging_utils import get_logger

logger = get_logger(__name__)

DEFAULT_SAMPLE_RATE = 16000
SILENCE_PEAK = 1e-6
PCM16_SCALE = 32768.0


@dataclass
class AudioClip:
    """Mono waveform with its sample rate."""

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float64).reshape(-1)
        if self.sample_rate <= 0:
            raise AudioError(f"Sample rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(self.samples)):
            raise AudioError("Audio samples must be finite")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.samples))) if self.samples.size else 0.0


def normalize_peak(clip: AudioClip, target: float = 1.0) -> AudioClip:
    """
    Scale a clip down so its peak is at most ``target``.

    Raises:
        SilentClipError: If the peak is below the silence threshold
    """
    peak = clip.peak
    if peak < SILENCE_PEAK:
        raise SilentClipError(f"Clip is silent (peak {peak:.3g} < {SILENCE_PEAK})")
    if peak <= target:
        return clip
    return AudioClip(clip.samples * (target / peak), clip.sample_rate)


def resample_linear(samples: np.ndarray, source_rate: int, target_rate: int) -> np.ndarray:
    """Linear-interpolation resampling onto the target rate's time grid."""
    if source_rate == target_rate or samples.size == 0:
        return samples
    n_out = int(round(samples.size * target_rate / source_rate))
    t_out = np.arange(n_out) / target_rate
    t_in = np.arange(samples.size) / source_rate
    return np.interp(t_out, t_in, samples)


def read_wav(
    path: str | Path, target_rate: int = DEFAULT_SAMPLE_RATE, normalize: bool = True
) -> AudioClip:
    """
    Read a 16-bit PCM mono WAV file as a clip at ``target_rate``.

    With ``normalize`` the clip is scaled to peak <= 1 and silent clips are rejected.

    Raises:
        AudioFormatError: If the file is not 16-bit PCM mono or cannot be parsed
        SilentClipError: If the clip is silent
    """
    path = Path(path)
    try:
        rate, data = wavfile.read(path)
    except (ValueError, OSError) as e:
        raise AudioFormatError(f"Cannot read WAV file {path}: {e}") from e
    if data.ndim != 1:
        raise AudioFormatError(f"{path} has {data.shape[1]} channels; only mono is supported")
    if data.dtype != np.int16:
        raise AudioFormatError(f"{path} is {data.dtype}; only 16-bit PCM is supported")

    samples = data.astype(np.float64) / PCM16_SCALE
    if rate != target_rate:
        logger.info("Resampling %s from %d Hz to %d Hz", path.name, rate, target_rate)
        samples = resample_linear(samples, rate, target_rate)
    clip = AudioClip(samples, target_rate)
    return normalize_peak(clip) if normalize else clip


def write_wav(path: str | Path, clip: AudioClip) -> None:
    """Write a clip as 16-bit PCM mono, clipping to [-1, 1]."""
    pcm = np.clip(np.round(clip.samples * PCM16_SCALE), -PCM16_SCALE, PCM16_SCALE - 1)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    wavfile.write(Path(path), clip.sample_rate, pcm.astype("<i2"))
