"""Run a generator over clip pairs and score the results."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

from ..dsp.audio import AudioClip
from ..metrics import EvalPair, EvalResult, evaluate_pair_set
from ..model.generator import Generator, generator_forward
from .synth import SynthPair


def enhance_clip(generator: Generator, noisy: AudioClip) -> AudioClip:
    return generator_forward(noisy, generator).enhanced


def enhance_pairs(
    generator: Generator, pairs: Sequence[SynthPair], workers: int = 1
) -> list[EvalPair]:
    """Enhance every noisy clip; forward passes are read-only, so clips may run in threads."""

    def _one(pair: SynthPair) -> EvalPair:
        return EvalPair(pair.clip_id, pair.clean, pair.noisy, enhance_clip(generator, pair.noisy))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_one, pairs))
    return [_one(p) for p in pairs]


def evaluate_generator(
    generator: Generator, pairs: Sequence[SynthPair], workers: int = 1
) -> EvalResult:
    return evaluate_pair_set(enhance_pairs(generator, pairs, workers), workers=workers)
