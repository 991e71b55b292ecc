"""Data, training loop, checkpoints, inference and ablations."""

from efgn.pipeline.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from efgn.pipeline.config import (
    ABLATION_PRESETS,
    OptimizerConfig,
    PruneSchedule,
    SynthDatasetSpec,
    TrainConfig,
    apply_ablation,
    load_train_config,
)
from efgn.pipeline.enhance import enhance_file, evaluate_checkpoint
from efgn.pipeline.synth import SynthPair, load_pair_directory, synth_dataset
from efgn.pipeline.trainer import Trainer, TrainResult, train

__all__ = [
    "ABLATION_PRESETS",
    "Checkpoint",
    "OptimizerConfig",
    "PruneSchedule",
    "SynthDatasetSpec",
    "SynthPair",
    "TrainConfig",
    "TrainResult",
    "Trainer",
    "apply_ablation",
    "enhance_file",
    "evaluate_checkpoint",
    "load_checkpoint",
    "load_pair_directory",
    "load_train_config",
    "save_checkpoint",
    "synth_dataset",
    "train",
]
