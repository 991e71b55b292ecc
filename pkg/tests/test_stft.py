import numpy as np
import pytest

from efgn.autodiff import Tensor
from efgn.dsp import (
    AudioClip,
    istft,
    istft_frames,
    istft_tensor,
    power_compress,
    power_decompress,
    stack_features,
    stft,
    stft_frames,
    unstack_features,
)
from efgn.dsp.stft import Spectrogram
from efgn.exceptions import ConfigError, ShapeError, StftError


def test_roundtrip_reconstructs_random_clips():
    rng = np.random.default_rng(11)
    for _ in range(50):
        length = int(rng.integers(100, 4000))
        clip = AudioClip(rng.uniform(-1, 1, length))
        restored = istft(stft(clip))
        assert len(restored) == length
        assert np.max(np.abs(restored.samples - clip.samples)) < 1e-6


@pytest.mark.parametrize("n_fft,hop", [(16, 4), (64, 16), (512, 128)])
def test_roundtrip_other_framings(rng, n_fft, hop):
    x = rng.standard_normal(1000)
    y = istft_frames(stft_frames(x, n_fft, hop), 1000, n_fft, hop)
    np.testing.assert_allclose(y, x, atol=1e-9)


@pytest.mark.parametrize("length,frames", [(100, 2), (16000, 161), (16099, 161), (250, 3)])
def test_frame_count_is_length_over_hop_plus_one(length, frames):
    spec = stft(AudioClip(np.ones(length)))
    assert spec.num_frames == frames
    assert spec.num_bins == 201


def test_batched_frames_match_single_clip(rng):
    batch = rng.standard_normal((3, 640))
    grid = stft_frames(batch, 16, 4)
    assert grid.shape == (3, 161, 9)
    np.testing.assert_allclose(grid[1], stft_frames(batch[1], 16, 4))


def test_stft_errors():
    with pytest.raises(StftError):
        stft_frames(np.ones(1000), n_fft=64, hop=128)
    with pytest.raises(StftError):
        stft_frames(np.ones(50), n_fft=400, hop=100)
    with pytest.raises(StftError, match="even"):
        stft_frames(np.ones(1000), n_fft=15, hop=4)
    spec = stft_frames(np.ones(1000), 400, 400)
    with pytest.raises(StftError, match="overlap-add"):
        istft_frames(spec, 1000, 400, 400)


def test_spectrogram_validates_grids():
    with pytest.raises(ShapeError):
        Spectrogram(np.ones((201, 3)), np.ones((201, 4)))
    with pytest.raises(ShapeError):
        Spectrogram(np.ones((200, 3)), np.ones((200, 3)))


def test_tensor_istft_matches_numpy(rng):
    spec = stft_frames(rng.standard_normal((2, 200)), 16, 4)
    out = istft_tensor(Tensor(spec.real), Tensor(spec.imag), 200, 16, 4)
    np.testing.assert_allclose(out.data, istft_frames(spec, 200, 16, 4), atol=1e-12)
    with pytest.raises(ShapeError):
        istft_tensor(Tensor(spec.real), Tensor(spec.imag[..., :-1]), 200, 16, 4)


def test_power_compression_inverts(rng):
    mag = rng.uniform(0, 5, (9, 20))
    np.testing.assert_allclose(power_decompress(power_compress(mag)), mag, rtol=1e-12)
    np.testing.assert_allclose(power_compress(mag, 0.5), np.sqrt(mag))
    t = power_compress(Tensor(mag))
    assert isinstance(t, Tensor)
    np.testing.assert_allclose(t.data, mag ** 0.3)


def test_power_compression_rejects_bad_input():
    with pytest.raises(StftError, match="nonnegative"):
        power_compress(np.array([-1.0, 1.0]))
    with pytest.raises(StftError, match="nonnegative"):
        power_decompress(Tensor(np.array([0.5, -0.5])))
    with pytest.raises(ConfigError, match="Compression factor"):
        power_compress(np.ones(3), c=0.0)
    with pytest.raises(ConfigError, match="Compression factor"):
        power_decompress(np.ones(3), c=1.5)


def test_feature_stacking_layout(rng):
    mag, phase = rng.uniform(0, 1, (9, 5)), rng.uniform(-np.pi, np.pi, (9, 5))
    features = stack_features(mag, phase)
    assert features.tensor.shape == (1, 2, 5, 9)
    back_mag, back_phase = unstack_features(features)
    np.testing.assert_array_equal(back_mag, mag)
    np.testing.assert_array_equal(back_phase, phase)
    with pytest.raises(ShapeError):
        stack_features(mag, phase[:, :4])
