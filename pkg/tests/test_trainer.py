import json
import math
from dataclasses import replace

import numpy as np
import pytest

from efgn.dsp import AudioClip, write_wav
from efgn.exceptions import ConfigError, NonFiniteLossError
from efgn.model import DiscriminatorConfig, GeneratorConfig
from efgn.pipeline.checkpoint import decode_checkpoint, encode_checkpoint, load_checkpoint
from efgn.pipeline.config import OptimizerConfig, PruneSchedule, SynthDatasetSpec, TrainConfig
from efgn.pipeline.trainer import PRUNE_SCOPE, Trainer, history_path, train
from efgn.pruning import prune_scope


@pytest.fixture
def trainer(micro_train_config):
    return Trainer(micro_train_config)


@pytest.fixture
def pairs(trainer):
    return trainer.dataset()


def test_dataset_split(pairs):
    train_pairs, heldout = pairs
    assert len(train_pairs) == 6
    assert len(heldout) == 2
    assert len(train_pairs[0].clean) == 128


def test_train_step_is_finite_with_scores_in_unit_interval(trainer, pairs):
    report = trainer.train_step(pairs[0][:2])
    assert report.is_finite()
    assert 0.0 <= report.score_min <= report.score_max <= 1.0
    assert report.l_generator > 0
    assert report.l_pha == pytest.approx(report.l_ip + report.l_gd + report.l_iaf)
    assert trainer.g_opt.step_count == trainer.d_opt.step_count == 1
    assert all(p.grad is None for p in trainer.params)


def test_train_step_changes_both_models(trainer, pairs):
    before = trainer.params.state_dict()
    trainer.train_step(pairs[0][:2])
    after = trainer.params.state_dict()
    changed = {name.split(".")[0] for name in before if not np.array_equal(before[name], after[name])}
    assert changed == {"generator", "discriminator"}


def test_zero_learning_rate_leaves_parameters_unchanged(trainer, pairs):
    trainer.g_opt.lr = 0.0
    trainer.d_opt.lr = 0.0
    before = trainer.params.state_dict()
    trainer.train_step(pairs[0][:2])
    for name, value in trainer.params.state_dict().items():
        np.testing.assert_array_equal(value, before[name])


def test_metric_proxy_labels(micro_train_config):
    trainer = Trainer(replace(micro_train_config, label_mode="metric-proxy"))
    train_pairs, _ = trainer.dataset()
    assert trainer.train_step(train_pairs[:2]).is_finite()


def test_non_finite_values_are_reported_by_name(trainer, pairs):
    weight = trainer.params["generator.mask_decoder.head.weight"]
    weight.tensor.data[...] = np.nan
    with pytest.raises(NonFiniteLossError) as info:
        trainer.train_step(pairs[0][:2])
    assert info.value.tensor_name == "score_fake"


def test_history_is_deterministic(micro_train_config):
    first = train(micro_train_config).history
    second = train(micro_train_config).history
    assert [r.to_dict() for r in first] == [r.to_dict() for r in second]
    assert [r.epoch for r in first] == [1, 2]
    assert all(r.steps == 3 for r in first)
    assert set(first[-1].heldout) >= {"ssnr_enh", "sisnr_enh", "ssnr_delta"}


def test_different_seeds_diverge(micro_train_config):
    a = Trainer(micro_train_config).params.state_dict()
    b = Trainer(replace(micro_train_config, seed=8)).params.state_dict()
    assert any(not np.array_equal(a[k], b[k]) for k in a)


def test_sparsity_follows_the_prune_schedule(micro_train_config):
    cfg = replace(micro_train_config, epochs=3, prune=PruneSchedule(amount=0.3, epoch=2))
    history = train(cfg).history
    assert history[0].sparsity == 0.0
    assert history[1].sparsity == pytest.approx(0.3, abs=0.005)
    assert history[2].sparsity == pytest.approx(0.3, abs=0.005)


def test_iterative_schedule_ramps_sparsity(micro_train_config):
    cfg = replace(
        micro_train_config, epochs=3, prune=PruneSchedule(amount=0.3, mode="iterative", epoch=1, steps=3)
    )
    sparsities = [r.sparsity for r in train(cfg).history]
    assert sparsities == sorted(sparsities)
    assert sparsities[0] == pytest.approx(0.1, abs=0.01)
    assert sparsities[-1] == pytest.approx(0.3, abs=0.005)


def test_no_prune_keeps_all_weights(no_prune_config):
    result = train(no_prune_config)
    assert all(r.sparsity == 0.0 for r in result.history)
    assert all(p.mask is None for p in result.trainer.params)


def test_train_writes_checkpoint_and_history(tmp_path, micro_train_config):
    out = tmp_path / "runs" / "micro.efgn"
    result = train(micro_train_config, out)
    assert result.checkpoint_path == out
    assert load_checkpoint(out).epoch == 2
    history = json.loads(history_path(out).read_text())
    assert [h["epoch"] for h in history] == [1, 2]
    assert history_path(out).name == "micro.history.json"
    assert result.final_heldout == history[-1]["heldout"]


def test_resume_matches_uninterrupted_run(micro_train_config):
    straight = Trainer(micro_train_config)
    train_pairs, _ = straight.dataset()
    straight.fit(train_pairs)

    first_half = Trainer(micro_train_config)
    first_half.prune_for_epoch(1)
    first_half.run_epoch(train_pairs)
    first_half.epoch = 1
    resumed = Trainer.from_checkpoint(decode_checkpoint(encode_checkpoint(first_half.to_checkpoint())))
    resumed.fit(train_pairs)

    assert resumed.epoch == 2
    for name, value in straight.params.state_dict().items():
        np.testing.assert_array_equal(resumed.params[name].data, value)


def test_prune_covers_generator_and_discriminator_conv_weights(trainer):
    scope = prune_scope(trainer.params, PRUNE_SCOPE)
    n = sum(p.size for p in scope)
    assert trainer.prune_for_epoch(1) == pytest.approx(0.3)

    discriminator_convs = [p for p in scope if p.name.startswith("discriminator.")]
    assert discriminator_convs
    assert all(p.mask is not None for p in scope)
    assert sum(int(p.size - np.count_nonzero(p.mask)) for p in scope) == math.floor(0.3 * n)
    assert all(p.mask is None for p in trainer.params if p.kind != "conv")
    assert trainer.sparsity() == pytest.approx(0.3, abs=0.005)


def test_invalid_configs_are_rejected(micro_train_config):
    with pytest.raises(ConfigError):
        Trainer(replace(micro_train_config, optimizer=OptimizerConfig(lr_generator=0.0)))
    with pytest.raises(ConfigError):
        Trainer(replace(micro_train_config, label_mode="oracle"))


def test_float32_training_keeps_dtype(micro_train_config):
    trainer = Trainer(replace(micro_train_config, dtype="float32"))
    train_pairs, _ = trainer.dataset()
    assert trainer.train_step(train_pairs[:2]).is_finite()
    assert all(p.data.dtype == np.float32 for p in trainer.params)


@pytest.mark.slow
def test_overfits_a_single_batch():
    cfg = TrainConfig(
        seed=0,
        dtype="float64",
        use_pruning=False,
        generator=GeneratorConfig.micro(),
        discriminator=DiscriminatorConfig.micro(dropout=0.0),
        optimizer=OptimizerConfig(lr_generator=2e-3),
        dataset=SynthDatasetSpec(num_clips=2, clip_seconds=0.016, heldout_fraction=0.0, seed=1),
    )
    trainer = Trainer(cfg)
    batch, _ = trainer.dataset()
    first = trainer.train_step(batch).l_generator
    for _ in range(199):
        last = trainer.train_step(batch).l_generator
    assert last <= 0.5 * first


@pytest.mark.slow
def test_desk_run_improves_heldout_ssnr():
    cfg = TrainConfig(
        epochs=3,
        dataset=SynthDatasetSpec(num_clips=40, clip_seconds=0.5, seed=2),
    )
    heldout = train(cfg).final_heldout
    assert heldout["ssnr_delta"] > 0


def test_shortest_valid_clip_trains(micro_train_config):
    discriminator = DiscriminatorConfig.micro(pooled=(4, 1))
    cfg = replace(
        micro_train_config,
        discriminator=discriminator,
        dataset=SynthDatasetSpec(num_clips=2, clip_seconds=0.003, heldout_fraction=0.0, seed=1),
    )
    assert cfg.min_clip_samples() == 48 == cfg.dataset.clip_samples
    trainer = Trainer(cfg)
    batch, _ = trainer.dataset()
    assert trainer.train_step(batch).is_finite()

    with pytest.raises(ConfigError, match="48 samples"):
        Trainer(replace(cfg, dataset=replace(cfg.dataset, clip_seconds=0.00275)))


def test_short_directory_clips_are_rejected(tmp_path, micro_train_config):
    tone = AudioClip(0.5 * np.sin(np.arange(40) / 3), 16000)
    for sub in ("clean", "noisy"):
        (tmp_path / sub).mkdir()
        write_wav(tmp_path / sub / "a.wav", tone)
    cfg = replace(
        micro_train_config,
        discriminator=DiscriminatorConfig.micro(pooled=(4, 1)),
        dataset_dir=str(tmp_path),
    )
    with pytest.raises(ConfigError, match=r"\(48 samples\): a$"):
        Trainer(cfg).dataset()


def test_spectral_norms_stay_near_one_through_pruning(trainer, pairs):
    train_pairs, _ = pairs
    trainer.train_step(train_pairs[:2])
    trainer.prune_for_epoch(1)
    trainer.train_step(train_pairs[2:4])
    for sigma in trainer.discriminator.normalized_sigmas().values():
        assert sigma == pytest.approx(1.0, abs=0.1)
