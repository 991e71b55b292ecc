import math

from efgn.pipeline.ablation import (
    param_table,
    preset_param_count,
    render_ablation_table,
    render_param_table,
    run_ablation,
)
from efgn.pipeline.trainer import PRUNE_SCOPE, Trainer
from efgn.pruning import prune_scope


def test_param_counts_per_preset(micro_train_config):
    counts = {c.preset: c for c in param_table(micro_train_config)}
    assert list(counts) == ["baseline", "no-depthwise", "no-res", "no-prune"]

    scope = sum(p.size for p in prune_scope(Trainer(micro_train_config).params, PRUNE_SCOPE))
    baseline = counts["baseline"]
    assert baseline.model_raw - baseline.model_effective == math.floor(0.3 * scope)
    assert baseline.effective < baseline.raw
    assert baseline.model_raw > baseline.raw
    no_prune = counts["no-prune"]
    assert no_prune.effective == no_prune.raw == baseline.raw
    assert no_prune.model_effective == no_prune.model_raw == baseline.model_raw
    assert counts["no-res"].raw == baseline.raw
    assert counts["no-depthwise"].raw > baseline.raw


def test_single_preset_count(micro_train_config):
    assert preset_param_count(micro_train_config, "no-prune").preset == "no-prune"


def test_run_ablation_trains_each_preset(tmp_path, micro_train_config):
    rows = run_ablation(micro_train_config, ("baseline", "no-prune"), out_dir=tmp_path)
    assert [r.preset for r in rows] == ["baseline", "no-prune"]
    assert (tmp_path / "baseline.efgn").exists()
    assert (tmp_path / "no-prune.efgn").exists()

    baseline, no_prune = rows
    assert abs(baseline.sparsity - 0.3) <= 0.005
    assert baseline.effective_params < baseline.params
    assert no_prune.sparsity == 0.0
    assert no_prune.effective_params == no_prune.params
    assert math.isfinite(baseline.ssnr_db) and math.isfinite(baseline.si_snr_delta)

    table = render_ablation_table(rows)
    assert table.row_count == 2
    assert render_param_table(param_table(micro_train_config)).row_count == 4
