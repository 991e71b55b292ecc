import json
from dataclasses import dataclass

import pytest

from efgn.config import Settings, dataclass_from_dict
from efgn.exceptions import ConfigError
from efgn.model import DiscriminatorConfig, GeneratorConfig
from efgn.pipeline.config import (
    ABLATION_PRESETS,
    PruneSchedule,
    SynthDatasetSpec,
    TrainConfig,
    apply_ablation,
    load_train_config,
)


def test_settings_default():
    settings = Settings()
    assert settings.seed is None
    assert settings.log_level == "INFO"
    assert settings.workers == 1


def test_settings_from_env_with_custom_values(monkeypatch):
    monkeypatch.setenv("EFGN_SEED", "42")
    monkeypatch.setenv("EFGN_LOG_LEVEL", "debug")
    monkeypatch.setenv("EFGN_WORKERS", "3")

    settings = Settings.from_env()
    assert settings.seed == 42
    assert settings.log_level == "DEBUG"
    assert settings.workers == 3


def test_settings_from_env_with_no_value():
    settings = Settings.from_env()
    assert settings.seed is None
    assert settings.workers == 1


def test_settings_from_env_rejects_bad_integers(monkeypatch):
    monkeypatch.setenv("EFGN_SEED", "abc")
    with pytest.raises(ConfigError):
        Settings.from_env()

    monkeypatch.setenv("EFGN_SEED", "1")
    monkeypatch.setenv("EFGN_WORKERS", "0")
    with pytest.raises(ConfigError):
        Settings.from_env()


@dataclass(frozen=True)
class _Pair:
    a: int = 1
    b: tuple[int, ...] = (1, 2)


def test_dataclass_from_dict_converts_lists_and_rejects_unknown_keys():
    assert dataclass_from_dict(_Pair, {"b": [3, 4]}) == _Pair(1, (3, 4))
    with pytest.raises(ConfigError, match="Unknown keys"):
        dataclass_from_dict(_Pair, {"c": 1})
    with pytest.raises(ConfigError):
        dataclass_from_dict(_Pair, [1, 2])  # type: ignore[arg-type]


def test_train_config_defaults_are_valid():
    cfg = TrainConfig().validate()
    assert cfg.optimizer.lr_generator == pytest.approx(5e-4)
    assert cfg.optimizer.lr_discriminator == pytest.approx(1e-3)
    assert cfg.optimizer.betas == (0.8, 0.99)
    assert cfg.prune.amount == pytest.approx(0.3)
    assert cfg.dataset.snr_levels == (2.5, 7.5, 12.5, 17.5)
    assert cfg.use_depthwise and cfg.use_residual_attention and cfg.use_pruning


def test_train_config_round_trips_through_json():
    cfg = TrainConfig(epochs=3, seed=11)
    restored = TrainConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert restored == cfg


@pytest.mark.parametrize(
    "data",
    [
        {"epochs": 0},
        {"dtype": "float16"},
        {"optimizer": {"lr_generator": 0.0}},
        {"optimizer": {"lr_discriminator": -1e-3}},
        {"prune": {"amount": 1.0}},
        {"prune": {"mode": "gradual"}},
        {"dataset": {"noise_kinds": ["brown"]}},
        {"generator": {"heads": 3}},
        {"unknown": 1},
    ],
)
def test_train_config_rejects_invalid_values(data):
    with pytest.raises(ConfigError):
        TrainConfig.from_dict(data)


def test_load_train_config_applies_seed_override(tmp_path, monkeypatch):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"seed": 5, "epochs": 2}))
    assert load_train_config(path).seed == 5

    monkeypatch.setenv("EFGN_SEED", "99")
    cfg = load_train_config(path)
    assert cfg.seed == 99
    assert cfg.epochs == 2


def test_load_train_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_train_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="Invalid JSON"):
        load_train_config(bad)


def test_prune_schedule_one_shot_defaults_to_middle_epoch():
    assert PruneSchedule().targets(5) == {3: 0.3}
    assert PruneSchedule().targets(4) == {2: 0.3}
    assert PruneSchedule(epoch=1).targets(1) == {1: 0.3}
    assert PruneSchedule(epoch=6).targets(5) == {}


def test_prune_schedule_iterative_is_cumulative():
    plan = PruneSchedule(amount=0.3, mode="iterative", epoch=2, steps=3).targets(10)
    assert list(plan) == [2, 3, 4]
    assert [round(v, 10) for v in plan.values()] == [0.1, 0.2, 0.3]
    # steps past the last epoch collapse onto it; the final amount wins
    clamped = PruneSchedule(amount=0.3, mode="iterative", epoch=4, steps=3).targets(5)
    assert clamped[5] == pytest.approx(0.3)


def test_apply_ablation_presets():
    cfg = TrainConfig()
    assert apply_ablation(cfg, "baseline") == cfg
    assert not apply_ablation(cfg, "no-depthwise").use_depthwise
    assert not apply_ablation(cfg, "no-res").use_residual_attention
    assert not apply_ablation(cfg, "no-prune").use_pruning
    assert ABLATION_PRESETS == ("baseline", "no-depthwise", "no-res", "no-prune")
    with pytest.raises(ConfigError):
        apply_ablation(cfg, "w/o everything")


def test_synth_spec_validation():
    assert SynthDatasetSpec().clip_samples == 16000
    with pytest.raises(ConfigError):
        SynthDatasetSpec(f0_range=(300.0, 150.0)).validate()
    with pytest.raises(ConfigError):
        SynthDatasetSpec(snr_levels=()).validate()


def test_desk_config_rejects_clips_shorter_than_the_discriminator_grid():
    cfg = TrainConfig()
    assert cfg.min_clip_samples() == 4800
    with pytest.raises(ConfigError, match=r"at least 0\.3 s \(4800 samples\)"):
        TrainConfig(dataset=SynthDatasetSpec(clip_seconds=0.2)).validate()
    TrainConfig(dataset=SynthDatasetSpec(clip_seconds=0.3)).validate()


def test_discriminator_grid_must_fit_the_frequency_bins():
    cfg = TrainConfig(generator=GeneratorConfig.micro(), discriminator=DiscriminatorConfig())
    with pytest.raises(ConfigError, match="n_fft 16"):
        cfg.validate()
