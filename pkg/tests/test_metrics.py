import numpy as np
import pytest

from efgn.dsp import AudioClip
from efgn.exceptions import MetricError
from efgn.metrics import (
    EvalPair,
    evaluate_pair_set,
    global_snr,
    render_table,
    si_snr,
    ssnr,
    write_report,
)


def _noise(rng, n, scale):
    return AudioClip(rng.standard_normal(n) * scale)


def test_ssnr_bounds(tone):
    assert ssnr(tone, tone) == 35.0
    assert ssnr(tone, AudioClip(np.zeros(len(tone)))) == pytest.approx(0.0)
    assert ssnr(tone, AudioClip(-5 * tone.samples)) == -10.0


def test_ssnr_skips_silent_frames(tone):
    padded = AudioClip(np.concatenate([np.zeros(1024), tone.samples]))
    half = AudioClip(np.concatenate([np.zeros(1024), 0.5 * tone.samples]))
    assert ssnr(padded, half) == pytest.approx(ssnr(tone, AudioClip(0.5 * tone.samples)), abs=0.5)
    assert ssnr(padded, half) == pytest.approx(20 * np.log10(2), abs=1e-9)


def test_ssnr_and_si_snr_errors(tone):
    with pytest.raises(MetricError, match="Length"):
        ssnr(tone, AudioClip(np.zeros(10)))
    with pytest.raises(MetricError, match="Sample-rate"):
        si_snr(tone, AudioClip(tone.samples, 8000))
    silent = AudioClip(np.zeros(len(tone)))
    with pytest.raises(MetricError):
        ssnr(silent, tone)
    with pytest.raises(MetricError):
        si_snr(silent, tone)


def test_si_snr_is_scale_invariant(tone, rng):
    noisy = AudioClip(tone.samples + 0.1 * rng.standard_normal(len(tone)))
    scaled = AudioClip(3.0 * noisy.samples)
    assert si_snr(tone, noisy) == pytest.approx(si_snr(tone, scaled), abs=1e-9)
    assert si_snr(tone, AudioClip(2.0 * tone.samples)) == 40.0


def test_global_snr_matches_power_ratio(tone):
    noise = np.full(len(tone), 0.05)
    expected = 10 * np.log10(np.sum(tone.samples**2) / np.sum(noise**2))
    assert global_snr(tone, AudioClip(tone.samples + noise)) == pytest.approx(expected)


def test_evaluate_pair_set_sorts_and_summarizes(tone, rng):
    pairs = [
        EvalPair(name, tone, AudioClip(tone.samples + _noise(rng, len(tone), 0.2).samples), tone)
        for name in ("b", "a")
    ]
    result = evaluate_pair_set(pairs, workers=2)
    assert [r.clip for r in result.rows] == ["a", "b"]
    summary = result.summary()
    assert summary["clips"] == 2.0
    assert summary["ssnr_enh"] == 35.0
    assert summary["ssnr_delta"] > 0
    assert summary["sisnr_delta"] > 0
    assert summary["time_l1"] == 0.0
    with pytest.raises(MetricError):
        evaluate_pair_set([])


def test_write_report_layout(tmp_path, tone):
    result = evaluate_pair_set([EvalPair("clip", tone, AudioClip(0.5 * tone.samples), tone)])
    path = write_report(result, tmp_path / "out" / "report.tsv")
    lines = path.read_text().splitlines()
    assert lines[0].split("\t") == ["clip", "input_snr_db", "ssnr_noisy", "ssnr_enh", "sisnr_noisy", "sisnr_enh"]
    assert lines[1].startswith("clip\t6.0206\t")
    assert lines[2] == ""
    assert "# clips=1.0000" in lines
    assert any(line.startswith("# ssnr_delta=") for line in lines)


def test_render_table_has_mean_row(tone):
    result = evaluate_pair_set([EvalPair("x", tone, AudioClip(0.5 * tone.samples), tone)])
    table = render_table(result)
    assert table.row_count == 2
