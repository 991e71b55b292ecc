from __future__ import annotations

from pathlib import Path

import typer
from rich import print

from .config import Settings
from .diagnostics import SUITE_MODULES, render_suite, run_suite
from .exceptions import EfgnError
from .logging_utils import configure_logging
from .metrics import render_table
from .pipeline.ablation import param_table, render_ablation_table, render_param_table, run_ablation
from .pipeline.checkpoint import load_checkpoint
from .pipeline.config import ABLATION_PRESETS, apply_ablation, load_train_config
from .pipeline.enhance import enhance_file, evaluate_checkpoint
from .pipeline.trainer import PRUNE_SCOPE, Trainer, history_path, train
from .pruning import sparsity_report

app = typer.Typer(help="Speech enhancement GAN: train, enhance, evaluate")


def _settings(verbose: bool) -> Settings:
    settings = Settings.from_env()
    configure_logging("DEBUG" if verbose else settings.log_level)
    return settings


def _fail(error: Exception) -> typer.Exit:
    print(f"[red]Error:[/red] {error}")
    return typer.Exit(code=1)


@app.command("train")
def train_command(
    out: Path = typer.Option(..., "--out", help="Checkpoint path to write"),
    config: Path | None = typer.Option(None, "--config", help="JSON training config"),
    ablation: str = typer.Option("baseline", help=f"One of: {', '.join(ABLATION_PRESETS)}"),
    verbose: bool = typer.Option(False, "--verbose", "-v"),
):
    """
    Train generator and discriminator, writing a checkpoint and its history.

    Example:
        efgn train --config desk.json --ablation no-prune --out runs/no-prune.efgn
    """
    try:
        settings = _settings(verbose)
        cfg = apply_ablation(load_train_config(config, settings), ablation)
        result = train(cfg, out, settings)
    except EfgnError as e:
        raise _fail(e)

    print(f"[green]Saved:[/green] {out}")
    print(f"History: {history_path(out)}")
    heldout = result.final_heldout
    if heldout:
        print(
            f"Held-out SSNR {heldout['ssnr_noisy']:.2f} -> {heldout['ssnr_enh']:.2f} dB, "
            f"SI-SNR {heldout['sisnr_noisy']:.2f} -> {heldout['sisnr_enh']:.2f} dB"
        )


@app.command()
def enhance(
    ckpt: Path = typer.Option(..., "--ckpt", help="Trained checkpoint"),
    in_wav: Path = typer.Option(..., "--in", help="Noisy 16-bit PCM mono WAV"),
    out_wav: Path = typer.Option(..., "--out", help="Where to write the enhanced WAV"),
    ref: Path | None = typer.Option(None, "--ref", help="Clean reference for metrics"),
    verbose: bool = typer.Option(False, "--verbose", "-v"),
):
    """Enhance one WAV file."""
    try:
        _settings(verbose)
        result = enhance_file(ckpt, in_wav, out_wav, ref)
    except EfgnError as e:
        raise _fail(e)

    print(f"[green]Wrote:[/green] {out_wav}")
    if result is not None:
        print(render_table(result, title=f"Metrics for {in_wav.name}"))


@app.command()
def evaluate(
    ckpt: Path = typer.Option(..., "--ckpt", help="Trained checkpoint"),
    dataset: str = typer.Option(
        "synth", help="'synth' (held-out split), a dataset spec .json, or a clean/ + noisy/ directory"
    ),
    report: Path | None = typer.Option(None, "--report", help="Tab-separated report path"),
    verbose: bool = typer.Option(False, "--verbose", "-v"),
):
    """Score a checkpoint on a set of clip pairs."""
    try:
        settings = _settings(verbose)
        result = evaluate_checkpoint(ckpt, dataset, report, settings)
    except EfgnError as e:
        raise _fail(e)

    print(render_table(result))
    print(
        f"SSNR improvement {result.ssnr_improvement:+.2f} dB, "
        f"SI-SNR improvement {result.si_snr_improvement:+.2f} dB"
    )
    if report is not None:
        print(f"Report: {report}")


@app.command("prune-report")
def prune_report(
    ckpt: Path = typer.Option(..., "--ckpt", help="Trained checkpoint"),
):
    """Print per-parameter and global sparsity of the generator and discriminator conv weights."""
    try:
        trainer = Trainer.from_checkpoint(load_checkpoint(ckpt), Settings.from_env())
    except EfgnError as e:
        raise _fail(e)
    print(sparsity_report(trainer.params, PRUNE_SCOPE).to_text())


@app.command()
def gradcheck(
    module: str = typer.Option("all", help=f"all or one of: {', '.join(SUITE_MODULES)}"),
    seed: int = typer.Option(0, help="Seed for the random inputs"),
):
    """Run the finite-difference gradient suite; exits 1 if any case fails."""
    try:
        outcomes = run_suite(module, seed)
    except EfgnError as e:
        raise _fail(e)

    print(render_suite(outcomes))
    failed = [o for o in outcomes if not o.passed]
    if failed:
        print(f"[red]{len(failed)} of {len(outcomes)} checks failed[/red]")
        raise typer.Exit(code=1)
    print(f"[green]All {len(outcomes)} checks passed[/green]")


@app.command()
def params(
    config: Path | None = typer.Option(None, "--config", help="JSON training config"),
):
    """Print generator and generator + discriminator parameter counts for every ablation preset."""
    try:
        cfg = load_train_config(config, Settings.from_env())
        counts = param_table(cfg)
    except EfgnError as e:
        raise _fail(e)
    print(render_param_table(counts))


@app.command()
def ablation(
    config: Path | None = typer.Option(None, "--config", help="JSON training config"),
    out_dir: Path | None = typer.Option(None, "--out-dir", help="Directory for per-preset checkpoints"),
    verbose: bool = typer.Option(False, "--verbose", "-v"),
):
    """Train and evaluate all ablation presets and print one row per preset."""
    try:
        settings = _settings(verbose)
        rows = run_ablation(load_train_config(config, settings), out_dir=out_dir, settings=settings)
    except EfgnError as e:
        raise _fail(e)
    print(render_ablation_table(rows))


def main() -> None:
    app()


if __name__ == "__main__":
    main()
