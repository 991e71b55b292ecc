import json
import re
from unittest.mock import patch

import numpy as np
import pytest
from typer.testing import CliRunner

from efgn.cli import app
from efgn.dsp import AudioClip, read_wav, write_wav
from efgn.pipeline.ablation import AblationRow
from efgn.pipeline.trainer import history_path


runner = CliRunner()


@pytest.fixture
def micro_config_file(tmp_path, micro_train_config):
    path = tmp_path / "micro.json"
    path.write_text(json.dumps(micro_train_config.to_dict()))
    return path


@pytest.fixture
def checkpoint(tmp_path, micro_config_file):
    out = tmp_path / "runs" / "micro.efgn"
    result = runner.invoke(app, ["train", "--config", str(micro_config_file), "--out", str(out)])
    assert result.exit_code == 0, result.output
    return out


def test_gradcheck_losses_passes():
    result = runner.invoke(app, ["gradcheck", "--module", "losses"])
    assert result.exit_code == 0
    assert "All 3 checks passed" in result.output


def test_gradcheck_unknown_module_fails():
    result = runner.invoke(app, ["gradcheck", "--module", "optimizer"])
    assert result.exit_code == 1
    assert "Error" in result.output


def test_params_lists_every_preset(micro_config_file):
    result = runner.invoke(app, ["params", "--config", str(micro_config_file)])
    assert result.exit_code == 0
    for preset in ("baseline", "no-depthwise", "no-res", "no-prune"):
        assert preset in result.output


def test_train_writes_checkpoint_and_history(checkpoint):
    assert checkpoint.exists()
    assert history_path(checkpoint).exists()


def test_train_with_missing_config_fails(tmp_path):
    result = runner.invoke(app, ["train", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path / "x.efgn")])
    assert result.exit_code == 1
    assert "not found" in result.output


def test_train_with_unknown_ablation_fails(tmp_path, micro_config_file):
    result = runner.invoke(
        app, ["train", "--config", str(micro_config_file), "--ablation", "no-everything", "--out", str(tmp_path / "x.efgn")]
    )
    assert result.exit_code == 1


def test_prune_report_shows_global_sparsity(checkpoint):
    result = runner.invoke(app, ["prune-report", "--ckpt", str(checkpoint)])
    assert result.exit_code == 0
    match = re.search(r"global_sparsity=([0-9.]+)", result.output)
    assert match is not None
    assert float(match.group(1)) == pytest.approx(0.3, abs=0.005)


def test_prune_report_rejects_corrupt_checkpoint(tmp_path):
    bad = tmp_path / "bad.efgn"
    bad.write_bytes(b"nonsense")
    result = runner.invoke(app, ["prune-report", "--ckpt", str(bad)])
    assert result.exit_code == 1
    assert "magic" in result.output


def test_enhance_keeps_length_and_scores_reference(tmp_path, checkpoint):
    rng = np.random.default_rng(0)
    t = np.arange(400) / 16000
    clean = 0.4 * np.sin(2 * np.pi * 220 * t)
    write_wav(tmp_path / "clean.wav", AudioClip(clean))
    write_wav(tmp_path / "noisy.wav", AudioClip(clean + 0.05 * rng.standard_normal(400)))
    out_wav = tmp_path / "enhanced.wav"

    result = runner.invoke(
        app,
        ["enhance", "--ckpt", str(checkpoint), "--in", str(tmp_path / "noisy.wav"),
         "--out", str(out_wav), "--ref", str(tmp_path / "clean.wav")],
    )
    assert result.exit_code == 0, result.output

    assert len(read_wav(out_wav, normalize=False)) == 400
    assert "SSNR" in result.output


def test_evaluate_heldout_split_writes_report(tmp_path, checkpoint):
    report = tmp_path / "report.tsv"
    result = runner.invoke(app, ["evaluate", "--ckpt", str(checkpoint), "--report", str(report)])
    assert result.exit_code == 0, result.output
    lines = report.read_text().splitlines()
    assert [line.split("\t")[0] for line in lines[1:3]] == ["synth_0006", "synth_0007"]
    assert "SI-SNR improvement" in result.output


def test_evaluate_missing_dataset_fails(tmp_path, checkpoint):
    result = runner.invoke(app, ["evaluate", "--ckpt", str(checkpoint), "--dataset", str(tmp_path / "nowhere")])
    assert result.exit_code == 1


def test_ablation_renders_rows(micro_config_file):
    rows = [AblationRow("baseline", 100, 70, 0.3, 5.0, 4.0, 1.0, 0.5)]
    with patch("efgn.cli.run_ablation", return_value=rows) as mock_run:
        result = runner.invoke(app, ["ablation", "--config", str(micro_config_file)])
    assert result.exit_code == 0
    mock_run.assert_called_once()
    assert "baseline" in result.output


def test_verbose_sets_debug_logging(micro_config_file, tmp_path):
    with patch("efgn.cli.configure_logging") as mock_logging, patch("efgn.cli.train") as mock_train:
        mock_train.return_value.final_heldout = {}
        result = runner.invoke(
            app, ["train", "--config", str(micro_config_file), "--out", str(tmp_path / "x.efgn"), "-v"]
        )
    assert result.exit_code == 0
    mock_logging.assert_called_once_with("DEBUG")
