"""Objective speech-quality metrics (segmental SNR, scale-invariant SNR) and reports."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from rich.table import Table

from .dsp.audio import AudioClip
from .exceptions import MetricError
from .logging_utils import get_logger

logger = get_logger(__name__)

SSNR_FRAME = 512
SSNR_CLAMP = (-10.0, 35.0)
SI_SNR_CLAMP = (-40.0, 40.0)
SILENT_ENERGY = 1e-8

REPORT_COLUMNS = ("clip", "input_snr_db", "ssnr_noisy", "ssnr_enh", "sisnr_noisy", "sisnr_enh")


def _check_pair(clean: AudioClip, test: AudioClip) -> None:
    if len(clean) != len(test):
        raise MetricError(f"Length mismatch: clean has {len(clean)} samples, test {len(test)}")
    if clean.sample_rate != test.sample_rate:
        raise MetricError(
            f"Sample-rate mismatch: {clean.sample_rate} Hz vs {test.sample_rate} Hz"
        )


def _db(num: np.ndarray | float, den: np.ndarray | float, clamp: tuple[float, float]) -> np.ndarray:
    lo, hi = clamp
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = 10.0 * np.log10(np.asarray(num) / np.asarray(den))
    return np.clip(np.nan_to_num(ratio, nan=lo, posinf=hi, neginf=lo), lo, hi)


def ssnr(
    clean: AudioClip,
    test: AudioClip,
    frame_len: int = SSNR_FRAME,
    clamp: tuple[float, float] = SSNR_CLAMP,
) -> float:
    """
    Segmental SNR in dB over non-overlapping frames.

    Frames whose clean energy is below 1e-8 are skipped; each frame's SNR is
    clamped before averaging. A trailing partial frame counts as a frame.

    Raises:
        MetricError: On mismatched clips or when every frame is silent
    """
    _check_pair(clean, test)
    n_frames = -(-len(clean) // frame_len)
    padded = n_frames * frame_len
    x = np.zeros(padded)
    e = np.zeros(padded)
    x[: len(clean)] = clean.samples
    e[: len(clean)] = clean.samples - test.samples
    clean_energy = (x.reshape(n_frames, frame_len) ** 2).sum(axis=1)
    error_energy = (e.reshape(n_frames, frame_len) ** 2).sum(axis=1)
    active = clean_energy >= SILENT_ENERGY
    if not np.any(active):
        raise MetricError("Every frame of the clean clip is silent")
    return float(_db(clean_energy[active], error_energy[active], clamp).mean())


def si_snr(
    clean: AudioClip, test: AudioClip, clamp: tuple[float, float] = SI_SNR_CLAMP
) -> float:
    """Scale-invariant SNR in dB of zero-meaned signals, clamped to ``clamp``."""
    _check_pair(clean, test)
    s = clean.samples - clean.samples.mean()
    t = test.samples - test.samples.mean()
    energy = float(s @ s)
    if energy < SILENT_ENERGY:
        raise MetricError("Clean clip is silent")
    target = (float(t @ s) / energy) * s
    residual = t - target
    return float(_db(float(target @ target), float(residual @ residual), clamp))


def global_snr(clean: AudioClip, noisy: AudioClip) -> float:
    """10 log10(P_clean / P_noise) with noise = noisy - clean (unclamped)."""
    _check_pair(clean, noisy)
    noise = noisy.samples - clean.samples
    with np.errstate(divide="ignore"):
        return float(10.0 * np.log10(np.sum(clean.samples**2) / np.sum(noise**2)))


@dataclass
class EvalPair:
    clip_id: str
    clean: AudioClip
    noisy: AudioClip
    enhanced: AudioClip


@dataclass
class EvalRow:
    clip: str
    input_snr_db: float
    ssnr_noisy: float
    ssnr_enh: float
    sisnr_noisy: float
    sisnr_enh: float
    time_l1: float

    def values(self) -> tuple[str | float, ...]:
        return (self.clip, self.input_snr_db, self.ssnr_noisy, self.ssnr_enh, self.sisnr_noisy, self.sisnr_enh)


@dataclass
class EvalResult:
    rows: list[EvalRow] = field(default_factory=list)

    def _mean(self, attr: str) -> float:
        return float(np.mean([getattr(r, attr) for r in self.rows]))

    @property
    def ssnr_db(self) -> float:
        return self._mean("ssnr_enh")

    @property
    def si_snr_db(self) -> float:
        return self._mean("sisnr_enh")

    @property
    def time_l1(self) -> float:
        return self._mean("time_l1")

    @property
    def ssnr_noisy_db(self) -> float:
        return self._mean("ssnr_noisy")

    @property
    def si_snr_noisy_db(self) -> float:
        return self._mean("sisnr_noisy")

    @property
    def ssnr_improvement(self) -> float:
        return self.ssnr_db - self.ssnr_noisy_db

    @property
    def si_snr_improvement(self) -> float:
        return self.si_snr_db - self.si_snr_noisy_db

    def summary(self) -> dict[str, float]:
        return {
            "clips": float(len(self.rows)),
            "ssnr_noisy": self.ssnr_noisy_db,
            "ssnr_enh": self.ssnr_db,
            "ssnr_delta": self.ssnr_improvement,
            "sisnr_noisy": self.si_snr_noisy_db,
            "sisnr_enh": self.si_snr_db,
            "sisnr_delta": self.si_snr_improvement,
            "time_l1": self.time_l1,
        }


def evaluate_pair(pair: EvalPair, frame_len: int = SSNR_FRAME) -> EvalRow:
    _check_pair(pair.clean, pair.enhanced)
    return EvalRow(
        clip=pair.clip_id,
        input_snr_db=global_snr(pair.clean, pair.noisy),
        ssnr_noisy=ssnr(pair.clean, pair.noisy, frame_len),
        ssnr_enh=ssnr(pair.clean, pair.enhanced, frame_len),
        sisnr_noisy=si_snr(pair.clean, pair.noisy),
        sisnr_enh=si_snr(pair.clean, pair.enhanced),
        time_l1=float(np.mean(np.abs(pair.clean.samples - pair.enhanced.samples))),
    )


def evaluate_pair_set(
    pairs: Sequence[EvalPair], frame_len: int = SSNR_FRAME, workers: int = 1
) -> EvalResult:
    """
    Per-clip metrics for enhanced and noisy inputs, rows sorted by clip id.

    Raises:
        MetricError: If ``pairs`` is empty
    """
    if not pairs:
        raise MetricError("Cannot evaluate an empty pair set")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda p: evaluate_pair(p, frame_len), pairs))
    else:
        rows = [evaluate_pair(p, frame_len) for p in pairs]
    result = EvalResult(sorted(rows, key=lambda r: r.clip))
    logger.info(
        "Evaluated %d clips: SSNR %.2f -> %.2f dB, SI-SNR %.2f -> %.2f dB",
        len(rows), result.ssnr_noisy_db, result.ssnr_db, result.si_snr_noisy_db, result.si_snr_db,
    )
    return result


def write_report(result: EvalResult, path: str | Path, delimiter: str = "\t") -> Path:
    """Write the per-clip table followed by a ``# key=value`` summary block."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        writer = csv.writer(f, delimiter=delimiter, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for row in result.rows:
            writer.writerow(
                [row.clip] + [f"{v:.4f}" for v in row.values()[1:]]  # type: ignore[str-format]
            )
        f.write("\n")
        for key, value in result.summary().items():
            f.write(f"# {key}={value:.4f}\n")
    return path


def render_table(result: EvalResult, title: str = "Evaluation") -> Table:
    table = Table(title=title, show_header=True)
    table.add_column("Clip", style="cyan")
    table.add_column("Input SNR", justify="right")
    table.add_column("SSNR noisy", justify="right")
    table.add_column("SSNR enh", justify="right", style="green")
    table.add_column("SI-SNR noisy", justify="right")
    table.add_column("SI-SNR enh", justify="right", style="green")
    for row in result.rows:
        table.add_row(row.clip, *(f"{v:.2f}" for v in row.values()[1:]))  # type: ignore[str-format]
    table.add_row(
        "[bold]mean[/bold]",
        f"{np.mean([r.input_snr_db for r in result.rows]):.2f}",
        f"{result.ssnr_noisy_db:.2f}",
        f"{result.ssnr_db:.2f}",
        f"{result.si_snr_noisy_db:.2f}",
        f"{result.si_snr_db:.2f}",
    )
    return table
