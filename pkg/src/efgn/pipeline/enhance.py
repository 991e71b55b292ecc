"""Checkpoint-level entry points: enhance one WAV file, evaluate a dataset."""
from __future__ import annotations

import json
from pathlib import Path

from ..config import Settings
from ..dsp.audio import read_wav, write_wav
from ..exceptions import AudioError, ConfigError
from ..logging_utils import get_logger
from ..metrics import EvalPair, EvalResult, evaluate_pair_set, write_report
from .checkpoint import load_checkpoint
from .config import SynthDatasetSpec, TrainConfig
from .inference import enhance_clip, evaluate_generator
from .synth import SynthPair, load_pair_directory, split_heldout, synth_dataset
from .trainer import Trainer

logger = get_logger(__name__)

SYNTH_HELDOUT = "synth"


def enhance_file(
    checkpoint: str | Path,
    in_wav: str | Path,
    out_wav: str | Path,
    ref_wav: str | Path | None = None,
) -> EvalResult | None:
    """
    Enhance ``in_wav`` into ``out_wav`` (same number of samples, at the checkpoint's sample rate).

    With ``ref_wav`` the clean reference is scored against the noisy input and
    the enhanced output.

    Raises:
        CheckpointError: If the checkpoint cannot be loaded
        AudioError: If a WAV file is unreadable or the reference length differs
    """
    trainer = Trainer.from_checkpoint(load_checkpoint(checkpoint))
    generator, rate = trainer.generator, trainer.cfg.dataset.sample_rate
    noisy = read_wav(in_wav, rate)
    enhanced = enhance_clip(generator, noisy)
    write_wav(out_wav, enhanced)
    logger.info("Wrote %.2fs of enhanced audio to %s", enhanced.duration, out_wav)
    if ref_wav is None:
        return None
    clean = read_wav(ref_wav, rate)
    if len(clean) != len(noisy):
        raise AudioError(f"Reference has {len(clean)} samples, input {len(noisy)}")
    return evaluate_pair_set([EvalPair(Path(in_wav).stem, clean, noisy, enhanced)])


def resolve_dataset(dataset: str | Path, cfg: TrainConfig, workers: int = 1) -> list[SynthPair]:
    """
    Clip pairs named by ``dataset``.

    ``"synth"`` is the held-out split of the checkpoint's own synthetic set;
    a ``.json`` file is a synthetic dataset spec (all of its clips are used);
    anything else is a directory with clean/ and noisy/ subdirectories.
    """
    if str(dataset) == SYNTH_HELDOUT:
        _, heldout = split_heldout(synth_dataset(cfg.dataset, workers), cfg.dataset.heldout_fraction)
        if not heldout:
            raise ConfigError("The checkpoint's dataset spec holds out no clips")
        return heldout
    path = Path(dataset)
    if path.suffix == ".json":
        if not path.exists():
            raise ConfigError(f"Dataset spec not found: {path}")
        try:
            spec = SynthDatasetSpec.from_dict(json.loads(path.read_text()))
        except json.JSONDecodeError as e:
            raise ConfigError(f"Invalid JSON in {path}: {e}") from e
        return synth_dataset(spec, workers)
    return load_pair_directory(path, cfg.dataset.sample_rate)


def evaluate_checkpoint(
    checkpoint: str | Path,
    dataset: str | Path,
    report: str | Path | None = None,
    settings: Settings | None = None,
) -> EvalResult:
    settings = settings or Settings()
    trainer = Trainer.from_checkpoint(load_checkpoint(checkpoint), settings)
    pairs = resolve_dataset(dataset, trainer.cfg, settings.workers)
    result = evaluate_generator(trainer.generator, pairs, settings.workers)
    if report is not None:
        write_report(result, report)
        logger.info("Wrote evaluation report to %s", report)
    return result
