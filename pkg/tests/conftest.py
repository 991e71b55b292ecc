from dataclasses import replace

import numpy as np
import pytest

from efgn.autodiff import reset_tape
from efgn.dsp.audio import AudioClip
from efgn.model.config import DiscriminatorConfig, GeneratorConfig
from efgn.pipeline.config import PruneSchedule, SynthDatasetSpec, TrainConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    for name in ("EFGN_SEED", "EFGN_LOG_LEVEL", "EFGN_WORKERS"):
        monkeypatch.delenv(name, raising=False)


@pytest.fixture(autouse=True)
def _fresh_tape():
    reset_tape()
    yield
    reset_tape()


@pytest.fixture
def tone():
    t = np.arange(1600) / 16000
    return AudioClip(0.5 * np.sin(2 * np.pi * 440 * t), 16000)


@pytest.fixture
def micro_train_config():
    """Two-epoch run over eight 8 ms clips with the micro generator and discriminator."""
    return TrainConfig(
        epochs=2,
        batch_size=2,
        seed=7,
        dtype="float64",
        generator=GeneratorConfig.micro(),
        discriminator=DiscriminatorConfig.micro(),
        prune=PruneSchedule(amount=0.3),
        dataset=SynthDatasetSpec(num_clips=8, clip_seconds=0.008, heldout_fraction=0.25, seed=3),
    )


@pytest.fixture
def no_prune_config(micro_train_config):
    return replace(micro_train_config, use_pruning=False)
