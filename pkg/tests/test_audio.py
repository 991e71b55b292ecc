import numpy as np
import pytest
from scipy.io import wavfile

from efgn.dsp import AudioClip, normalize_peak, read_wav, resample_linear, write_wav
from efgn.exceptions import AudioError, AudioFormatError, SilentClipError


def test_wav_roundtrip_within_quantization(tmp_path, tone):
    path = tmp_path / "nested" / "tone.wav"
    write_wav(path, tone)
    loaded = read_wav(path)
    assert loaded.sample_rate == 16000
    assert len(loaded) == len(tone)
    assert np.max(np.abs(loaded.samples - tone.samples)) <= 1.0 / 32768


def test_write_wav_clips_out_of_range(tmp_path):
    path = tmp_path / "loud.wav"
    write_wav(path, AudioClip(np.array([2.0, -2.0, 0.0])))
    _, data = wavfile.read(path)
    assert list(data) == [32767, -32768, 0]


def test_read_wav_resamples_to_target_rate(tmp_path):
    t = np.arange(800) / 8000
    wavfile.write(tmp_path / "low.wav", 8000, (0.3 * np.sin(2 * np.pi * 200 * t) * 32767).astype(np.int16))
    clip = read_wav(tmp_path / "low.wav", 16000)
    assert clip.sample_rate == 16000
    assert len(clip) == 1600


def test_read_wav_rejects_unsupported_files(tmp_path):
    wavfile.write(tmp_path / "stereo.wav", 16000, np.ones((100, 2), dtype=np.int16))
    with pytest.raises(AudioFormatError, match="mono"):
        read_wav(tmp_path / "stereo.wav")

    wavfile.write(tmp_path / "float.wav", 16000, np.ones(100, dtype=np.float32) * 0.1)
    with pytest.raises(AudioFormatError, match="16-bit"):
        read_wav(tmp_path / "float.wav")

    (tmp_path / "junk.wav").write_bytes(b"not a wav file")
    with pytest.raises(AudioFormatError):
        read_wav(tmp_path / "junk.wav")

    with pytest.raises(AudioFormatError):
        read_wav(tmp_path / "missing.wav")


def test_silent_clip_is_rejected(tmp_path):
    wavfile.write(tmp_path / "silent.wav", 16000, np.zeros(100, dtype=np.int16))
    with pytest.raises(SilentClipError):
        read_wav(tmp_path / "silent.wav")
    assert len(read_wav(tmp_path / "silent.wav", normalize=False)) == 100


def test_normalize_peak_only_scales_down():
    quiet = AudioClip(np.array([0.1, -0.5]))
    assert normalize_peak(quiet) is quiet
    loud = normalize_peak(AudioClip(np.array([4.0, -2.0])))
    np.testing.assert_allclose(loud.samples, [1.0, -0.5])


def test_audio_clip_validation():
    with pytest.raises(AudioError):
        AudioClip(np.ones(3), 0)
    with pytest.raises(AudioError):
        AudioClip(np.array([1.0, np.nan]))
    clip = AudioClip(np.ones((2, 2)), 4)
    assert len(clip) == 4
    assert clip.duration == 1.0


def test_resample_linear_identity_and_length():
    x = np.arange(10.0)
    assert resample_linear(x, 16000, 16000) is x
    assert resample_linear(x, 10, 20).size == 20
