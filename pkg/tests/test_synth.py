import numpy as np
import pytest

from efgn.dsp import AudioClip, write_wav
from efgn.exceptions import AudioError, ConfigError
from efgn.metrics import global_snr
from efgn.pipeline.config import SynthDatasetSpec
from efgn.pipeline.synth import (
    load_pair_directory,
    make_noise,
    mix_at_snr,
    split_heldout,
    synth_dataset,
)


@pytest.fixture
def small_spec():
    return SynthDatasetSpec(num_clips=12, clip_seconds=0.1, seed=5)


def test_pairs_hit_their_nominal_snr(small_spec):
    for pair in synth_dataset(small_spec):
        assert abs(global_snr(pair.clean, pair.noisy) - pair.snr_db) <= 0.1


def test_snr_and_noise_kind_cycle_by_index(small_spec):
    pairs = synth_dataset(small_spec)
    assert [p.snr_db for p in pairs[:5]] == [2.5, 7.5, 12.5, 17.5, 2.5]
    assert [p.noise_kind for p in pairs[::4]] == ["white", "pink", "band"]
    assert pairs[3].clip_id == "synth_0003"


def test_pairs_follow_the_additive_model(small_spec):
    for pair in synth_dataset(small_spec):
        np.testing.assert_array_equal(pair.noise, pair.noisy.samples - pair.clean.samples)
        assert np.std(pair.noise) > 0
        assert pair.noisy.peak <= 1.0 + 1e-12
        assert len(pair.clean) == len(pair.noisy) == 1600


def test_dataset_is_deterministic_and_worker_independent(small_spec):
    first = synth_dataset(small_spec)
    second = synth_dataset(small_spec, workers=3)
    for a, b in zip(first, second):
        np.testing.assert_array_equal(a.clean.samples, b.clean.samples)
        np.testing.assert_array_equal(a.noisy.samples, b.noisy.samples)
    other = synth_dataset(SynthDatasetSpec(num_clips=12, clip_seconds=0.1, seed=6))
    assert not np.array_equal(first[0].clean.samples, other[0].clean.samples)


def test_noise_kinds_are_unit_variance(rng):
    for kind in ("white", "pink", "band"):
        noise = make_noise(kind, rng, 8000, 16000)
        assert np.std(noise) == pytest.approx(1.0, rel=1e-6)
    with pytest.raises(ConfigError):
        make_noise("brown", rng, 100, 16000)


def test_pink_noise_tilts_toward_low_frequencies(rng):
    power = np.abs(np.fft.rfft(make_noise("pink", rng, 16000, 16000))) ** 2
    assert power[10:500].mean() > 10 * power[4000:8000].mean()


def test_mix_at_snr_scales_jointly_when_clipping(rng):
    clean = np.full(100, 0.9)
    clean[::2] = -0.9
    clean_out, noisy = mix_at_snr(clean, rng.standard_normal(100), 0.0)
    assert np.max(np.abs(noisy)) == pytest.approx(1.0)
    assert global_snr(AudioClip(clean_out), AudioClip(noisy)) == pytest.approx(0.0, abs=1e-9)


def test_split_heldout():
    pairs = list(range(8))
    train, held = split_heldout(pairs, 0.25)
    assert train == [0, 1, 2, 3, 4, 5] and held == [6, 7]
    assert split_heldout(pairs, 0.0) == (pairs, [])
    assert split_heldout([0], 0.5) == ([0], [])
    assert split_heldout([0, 1, 2, 3], 0.99) == ([0], [1, 2, 3])
    assert split_heldout(pairs, 0.01)[1] == [7]


def _write_pair(root, name, clean, noisy):
    write_wav(root / "clean" / name, AudioClip(clean))
    write_wav(root / "noisy" / name, AudioClip(noisy))


def test_load_pair_directory(tmp_path, tone, rng):
    noisy = tone.samples + 0.05 * rng.standard_normal(len(tone))
    _write_pair(tmp_path, "b.wav", tone.samples, noisy)
    _write_pair(tmp_path, "a.wav", tone.samples, noisy)
    write_wav(tmp_path / "clean" / "orphan.wav", tone)

    pairs = load_pair_directory(tmp_path)
    assert [p.clip_id for p in pairs] == ["a", "b"]
    assert pairs[0].noise_kind == "file"
    expected = global_snr(pairs[0].clean, pairs[0].noisy)
    assert pairs[0].snr_db == pytest.approx(expected)
    assert 15 < pairs[0].snr_db < 25


def test_load_pair_directory_errors(tmp_path, tone):
    with pytest.raises(ConfigError):
        load_pair_directory(tmp_path)
    (tmp_path / "clean").mkdir()
    (tmp_path / "noisy").mkdir()
    with pytest.raises(ConfigError, match="No matching"):
        load_pair_directory(tmp_path)
    _write_pair(tmp_path, "x.wav", tone.samples, tone.samples[:-10])
    with pytest.raises(AudioError):
        load_pair_directory(tmp_path)
