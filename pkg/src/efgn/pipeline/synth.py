"""
Synthetic (clean, noisy) training pairs and the directory-of-WAV-pairs adapter.

Clean sources are harmonic tone complexes under a syllable-rate envelope.
Noise is white, pink (1/f power) or band-limited, scaled so that
10 log10(P_clean / P_noise) equals the pair's nominal SNR.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import math
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.signal import butter, sosfilt

from ..dsp.audio import SILENCE_PEAK, AudioClip, read_wav
from ..exceptions import AudioError, ConfigError, SilentClipError
from ..logging_utils import get_logger
from ..metrics import global_snr
from .config import SynthDatasetSpec

logger = get_logger(__name__)

MAX_HARMONICS = 24
CLEAN_PEAK = 0.5
ENVELOPE_FLOOR = 0.05


@dataclass
class SynthPair:
    clip_id: str
    clean: AudioClip
    noisy: AudioClip
    snr_db: float
    noise_kind: str

    @property
    def noise(self) -> np.ndarray:
        return self.noisy.samples - self.clean.samples


def harmonic_source(
    rng: np.random.Generator, n: int, sample_rate: int, f0_range: tuple[float, float]
) -> np.ndarray:
    """Harmonic complex with a slow f0 glide and a syllable-like amplitude envelope."""
    t = np.arange(n) / sample_rate
    f0 = rng.uniform(*f0_range)
    glide = 1.0 + 0.05 * np.sin(2 * np.pi * rng.uniform(1.0, 4.0) * t + rng.uniform(0, 2 * np.pi))
    base_phase = 2 * np.pi * np.cumsum(f0 * glide) / sample_rate

    signal = np.zeros(n)
    nyquist = sample_rate / 2
    for k in range(1, MAX_HARMONICS + 1):
        if k * f0 * 1.05 >= nyquist:
            break
        amp = rng.uniform(0.5, 1.0) / k
        signal += amp * np.sin(k * base_phase + rng.uniform(0, 2 * np.pi))

    rate = rng.uniform(2.0, 5.0)
    envelope = 0.5 * (1 - np.cos(2 * np.pi * rate * t + rng.uniform(0, 2 * np.pi)))
    signal *= ENVELOPE_FLOOR + (1 - ENVELOPE_FLOOR) * envelope**2
    return signal * (CLEAN_PEAK / np.max(np.abs(signal)))


def make_noise(kind: str, rng: np.random.Generator, n: int, sample_rate: int) -> np.ndarray:
    """Unit-variance noise of the given kind."""
    white = rng.standard_normal(n)
    if kind == "white":
        noise = white
    elif kind == "pink":
        spectrum = np.fft.rfft(white)
        freqs = np.fft.rfftfreq(n, 1.0 / sample_rate)
        freqs[0] = freqs[1] if n > 1 else 1.0
        noise = np.fft.irfft(spectrum / np.sqrt(freqs), n=n)
    elif kind == "band":
        nyquist = sample_rate / 2
        low = rng.uniform(0.02, 0.3) * nyquist
        high = min(low * rng.uniform(1.5, 3.0), 0.9 * nyquist)
        sos = butter(4, [low, high], btype="bandpass", fs=sample_rate, output="sos")
        noise = sosfilt(sos, white)
    else:
        raise ConfigError(f"Unknown noise kind '{kind}'")
    return noise / (np.std(noise) + 1e-12)


def mix_at_snr(clean: np.ndarray, noise: np.ndarray, snr_db: float) -> tuple[np.ndarray, np.ndarray]:
    """
    Scale ``noise`` to the requested SNR and add it.

    If the mixture would clip, clean and noisy are scaled by the same factor,
    which leaves the SNR unchanged.

    Returns:
        (clean, noisy) after any joint scaling
    """
    p_clean = float(np.mean(clean**2))
    p_noise = float(np.mean(noise**2))
    noise = noise * math.sqrt(p_clean / (p_noise * 10 ** (snr_db / 10)))
    noisy = clean + noise
    peak = float(np.max(np.abs(noisy)))
    if peak > 1.0:
        clean, noisy = clean / peak, noisy / peak
    return clean, noisy


def _synth_pair(
    index: int, seed: np.random.SeedSequence, spec: SynthDatasetSpec
) -> SynthPair:
    rng = np.random.default_rng(seed)
    n = spec.clip_samples
    snr_db = float(spec.snr_levels[index % len(spec.snr_levels)])
    kind = spec.noise_kinds[(index // len(spec.snr_levels)) % len(spec.noise_kinds)]
    source = harmonic_source(rng, n, spec.sample_rate, spec.f0_range)
    clean, noisy = mix_at_snr(source, make_noise(kind, rng, n, spec.sample_rate), snr_db)
    return SynthPair(
        clip_id=f"synth_{index:04d}",
        clean=AudioClip(clean, spec.sample_rate),
        noisy=AudioClip(noisy, spec.sample_rate),
        snr_db=snr_db,
        noise_kind=kind,
    )


def synth_dataset(spec: SynthDatasetSpec, workers: int = 1) -> list[SynthPair]:
    """
    Generate ``spec.num_clips`` pairs, fully determined by ``spec.seed``.

    Each clip draws from its own child seed, so the result does not depend on
    ``workers``.
    """
    spec.validate()
    seeds = np.random.SeedSequence(spec.seed).spawn(spec.num_clips)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            pairs = list(pool.map(lambda i: _synth_pair(i, seeds[i], spec), range(spec.num_clips)))
    else:
        pairs = [_synth_pair(i, seeds[i], spec) for i in range(spec.num_clips)]
    logger.info(
        "Synthesized %d clips of %.2fs at SNRs %s dB",
        len(pairs), spec.clip_seconds, ", ".join(f"{s:g}" for s in spec.snr_levels),
    )
    return pairs


def split_heldout(pairs: Sequence[SynthPair], fraction: float) -> tuple[list[SynthPair], list[SynthPair]]:
    """Hold out the last ceil(fraction * N) pairs (at least one when fraction > 0)."""
    pairs = list(pairs)
    if fraction <= 0 or len(pairs) < 2:
        return pairs, []
    held = min(len(pairs) - 1, max(1, math.ceil(fraction * len(pairs))))
    return pairs[:-held], pairs[-held:]


def load_pair_directory(directory: str | Path, sample_rate: int = 16000) -> list[SynthPair]:
    """
    Pair ``<dir>/clean/*.wav`` with ``<dir>/noisy/*.wav`` by file name.

    Each pair is scaled jointly so the noisy clip peaks at most at 1.

    Raises:
        ConfigError: If the layout is missing or no names match
        AudioError: If a pair differs in length
    """
    directory = Path(directory)
    clean_dir, noisy_dir = directory / "clean", directory / "noisy"
    if not clean_dir.is_dir() or not noisy_dir.is_dir():
        raise ConfigError(f"{directory} must contain clean/ and noisy/ subdirectories")
    names = sorted(p.name for p in clean_dir.glob("*.wav") if (noisy_dir / p.name).exists())
    if not names:
        raise ConfigError(f"No matching clean/noisy WAV names under {directory}")

    pairs = []
    for name in names:
        clean = read_wav(clean_dir / name, sample_rate, normalize=False)
        noisy = read_wav(noisy_dir / name, sample_rate, normalize=False)
        if len(clean) != len(noisy):
            raise AudioError(f"{name}: clean has {len(clean)} samples, noisy {len(noisy)}")
        if noisy.peak < SILENCE_PEAK or clean.peak < SILENCE_PEAK:
            raise SilentClipError(f"{name}: clip is silent")
        scale = 1.0 / noisy.peak if noisy.peak > 1.0 else 1.0
        clean = AudioClip(clean.samples * scale, sample_rate)
        noisy = AudioClip(noisy.samples * scale, sample_rate)
        pairs.append(SynthPair(
            clip_id=Path(name).stem,
            clean=clean,
            noisy=noisy,
            snr_db=global_snr(clean, noisy),
            noise_kind="file",
        ))
    logger.info("Loaded %d clip pairs from %s", len(pairs), directory)
    return pairs
