"""Ablation matrix: baseline against no-depthwise, no-res and no-prune variants."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

from rich.table import Table

from ..autodiff.params import param_count
from ..config import Settings
from ..logging_utils import get_logger
from ..model.generator import GENERATOR_PREFIX
from ..pruning import apply_masks, l1_unstructured_prune
from .config import ABLATION_PRESETS, TrainConfig, apply_ablation
from .trainer import PRUNE_SCOPE, Trainer, train

logger = get_logger(__name__)


@dataclass
class ParamCount:
    preset: str
    raw: int  # generator
    effective: int  # generator, after the scheduled prune, if any
    model_raw: int  # generator and discriminator
    model_effective: int


@dataclass
class AblationRow:
    preset: str
    params: int
    effective_params: int
    sparsity: float
    ssnr_db: float
    si_snr_db: float
    ssnr_delta: float
    si_snr_delta: float

    def to_dict(self) -> dict[str, float | int | str]:
        return asdict(self)


def preset_param_count(cfg: TrainConfig, preset: str) -> ParamCount:
    """
    Parameter counts of ``preset`` at initialization.

    With pruning on, the full prune amount is applied to the freshly
    initialized models so the effective counts reflect where the global
    ranking lands between generator and discriminator.
    """
    variant = apply_ablation(cfg, preset)
    params = Trainer(variant).params
    if variant.use_pruning and variant.prune.amount > 0:
        apply_masks(params, l1_unstructured_prune(params, PRUNE_SCOPE, variant.prune.amount))
    return ParamCount(
        preset=preset,
        raw=param_count(params, GENERATOR_PREFIX),
        effective=param_count(params, GENERATOR_PREFIX, effective=True),
        model_raw=param_count(params, PRUNE_SCOPE),
        model_effective=param_count(params, PRUNE_SCOPE, effective=True),
    )


def param_table(cfg: TrainConfig, presets: Sequence[str] = ABLATION_PRESETS) -> list[ParamCount]:
    return [preset_param_count(cfg, p) for p in presets]


def run_ablation(
    cfg: TrainConfig,
    presets: Sequence[str] = ABLATION_PRESETS,
    out_dir: str | Path | None = None,
    settings: Settings | None = None,
) -> list[AblationRow]:
    """Train and evaluate every preset on the same data and seed."""
    rows = []
    for preset in presets:
        logger.info("Ablation preset '%s'", preset)
        out = Path(out_dir) / f"{preset}.efgn" if out_dir is not None else None
        result = train(apply_ablation(cfg, preset), out, settings)
        trainer = result.trainer
        heldout = result.final_heldout
        rows.append(AblationRow(
            preset=preset,
            params=param_count(trainer.params, GENERATOR_PREFIX),
            effective_params=param_count(trainer.params, GENERATOR_PREFIX, effective=True),
            sparsity=trainer.sparsity(),
            ssnr_db=heldout.get("ssnr_enh", float("nan")),
            si_snr_db=heldout.get("sisnr_enh", float("nan")),
            ssnr_delta=heldout.get("ssnr_delta", float("nan")),
            si_snr_delta=heldout.get("sisnr_delta", float("nan")),
        ))
    return rows


def render_param_table(counts: Sequence[ParamCount], title: str = "Parameters") -> Table:
    table = Table(title=title, show_header=True)
    table.add_column("Preset", style="cyan")
    table.add_column("Generator", justify="right")
    table.add_column("Effective", justify="right", style="green")
    table.add_column("G + D", justify="right")
    table.add_column("G + D effective", justify="right", style="green")
    for c in counts:
        table.add_row(
            c.preset, f"{c.raw:,}", f"{c.effective:,}", f"{c.model_raw:,}", f"{c.model_effective:,}"
        )
    return table


def render_ablation_table(rows: Sequence[AblationRow], title: str = "Ablation") -> Table:
    table = Table(title=title, show_header=True)
    table.add_column("Preset", style="cyan")
    table.add_column("Params", justify="right")
    table.add_column("Effective", justify="right")
    table.add_column("Sparsity", justify="right")
    table.add_column("SSNR", justify="right", style="green")
    table.add_column("SI-SNR", justify="right", style="green")
    table.add_column("dSSNR", justify="right")
    table.add_column("dSI-SNR", justify="right")
    for r in rows:
        table.add_row(
            r.preset, f"{r.params:,}", f"{r.effective_params:,}", f"{r.sparsity:.3f}",
            f"{r.ssnr_db:.2f}", f"{r.si_snr_db:.2f}", f"{r.ssnr_delta:+.2f}", f"{r.si_snr_delta:+.2f}",
        )
    return table
