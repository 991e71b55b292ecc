import json
from dataclasses import replace

import numpy as np
import pytest
from scipy.io import wavfile

from efgn.dsp import AudioClip, read_wav, write_wav
from efgn.exceptions import AudioError, ConfigError
from efgn.pipeline.enhance import enhance_file, evaluate_checkpoint, resolve_dataset
from efgn.pipeline.trainer import train


@pytest.fixture
def checkpoint(tmp_path, micro_train_config):
    out = tmp_path / "micro.efgn"
    train(micro_train_config, out)
    return out


def test_enhance_file_without_reference(tmp_path, checkpoint, tone):
    write_wav(tmp_path / "in.wav", tone)
    assert enhance_file(checkpoint, tmp_path / "in.wav", tmp_path / "out" / "enh.wav") is None
    enhanced = read_wav(tmp_path / "out" / "enh.wav", normalize=False)
    assert len(enhanced) == len(tone)


def test_enhance_file_reference_length_mismatch(tmp_path, checkpoint, tone):
    write_wav(tmp_path / "in.wav", tone)
    write_wav(tmp_path / "ref.wav", AudioClip(tone.samples[:-100]))
    with pytest.raises(AudioError):
        enhance_file(checkpoint, tmp_path / "in.wav", tmp_path / "out.wav", tmp_path / "ref.wav")


def test_resolve_dataset_variants(tmp_path, micro_train_config):
    heldout = resolve_dataset("synth", micro_train_config)
    assert [p.clip_id for p in heldout] == ["synth_0006", "synth_0007"]

    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"num_clips": 3, "clip_seconds": 0.01, "seed": 9}))
    assert len(resolve_dataset(spec, micro_train_config)) == 3

    with pytest.raises(ConfigError):
        resolve_dataset(tmp_path / "missing.json", micro_train_config)
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ConfigError):
        resolve_dataset(bad, micro_train_config)
    with pytest.raises(ConfigError):
        resolve_dataset(tmp_path, micro_train_config)


def test_evaluate_checkpoint_matches_training_heldout(tmp_path, checkpoint):
    result = evaluate_checkpoint(checkpoint, "synth", tmp_path / "report.tsv")
    history = json.loads((tmp_path / "micro.history.json").read_text())
    assert result.summary()["ssnr_enh"] == pytest.approx(history[-1]["heldout"]["ssnr_enh"])
    assert (tmp_path / "report.tsv").exists()
    assert np.isfinite(result.si_snr_improvement)


def test_enhance_file_uses_the_checkpoint_sample_rate(tmp_path, micro_train_config, tone):
    cfg = replace(micro_train_config, dataset=replace(micro_train_config.dataset, sample_rate=8000))
    ckpt = tmp_path / "narrow.efgn"
    train(cfg, ckpt)
    write_wav(tmp_path / "in.wav", tone)
    enhance_file(ckpt, tmp_path / "in.wav", tmp_path / "enh.wav")

    rate, data = wavfile.read(tmp_path / "enh.wav")
    assert rate == 8000
    assert len(data) == len(read_wav(tmp_path / "in.wav", target_rate=8000))
