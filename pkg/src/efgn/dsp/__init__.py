"""Time/frequency front and back ends: WAV I/O, STFT/ISTFT, compression."""

from efgn.dsp.audio import AudioClip, normalize_peak, read_wav, resample_linear, write_wav
from efgn.dsp.stft import (
    FeatureMap,
    Spectrogram,
    istft,
    istft_frames,
    istft_tensor,
    make_window,
    power_compress,
    power_decompress,
    stack_features,
    stft,
    stft_frames,
    unstack_features,
)

__all__ = [
    "AudioClip",
    "FeatureMap",
    "Spectrogram",
    "istft",
    "istft_frames",
    "istft_tensor",
    "make_window",
    "normalize_peak",
    "power_compress",
    "power_decompress",
    "read_wav",
    "resample_linear",
    "stack_features",
    "stft",
    "stft_frames",
    "unstack_features",
    "write_wav",
]
