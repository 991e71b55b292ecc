"""Adversarial training loop: one discriminator step, then one generator step, per batch."""
from __future__ import annotations

from dataclasses import dataclass, field
import json
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from ..autodiff.optim import AdamW, clip_grad_norm
from ..autodiff.params import ModelParams, param_count
from ..autodiff.tensor import Tensor, backward, no_grad
from ..config import Settings
from ..dsp.audio import AudioClip
from ..dsp.stft import power_compress, stft_frames
from ..exceptions import CheckpointError, ConfigError, NonFiniteLossError
from ..logging_utils import get_logger
from ..losses import (
    LossReport,
    complex_loss,
    discriminator_loss,
    generator_loss,
    magnitude_loss,
    metric_loss,
    metric_proxy_label,
    phase_loss,
    report_from_terms,
    time_loss,
)
from ..metrics import EvalResult
from ..model.discriminator import DISCRIMINATOR_PREFIX, Discriminator
from ..model.generator import GENERATOR_PREFIX, Generator
from ..pruning import apply_masks, l1_unstructured_prune, sparsity_report
from .checkpoint import Checkpoint, save_checkpoint
from .config import TrainConfig
from .inference import evaluate_generator
from .synth import SynthPair, load_pair_directory, split_heldout, synth_dataset

logger = get_logger(__name__)

# conv weights of both models, ranked together
PRUNE_SCOPE = (f"{DISCRIMINATOR_PREFIX}.", f"{GENERATOR_PREFIX}.")


def history_path(checkpoint_path: str | Path) -> Path:
    path = Path(checkpoint_path)
    return path.with_name(path.stem + ".history.json")


def _require_finite(named: Sequence[tuple[str, Tensor | None]]) -> None:
    for name, tensor in named:
        if tensor is not None and not np.all(np.isfinite(tensor.data)):
            raise NonFiniteLossError(name)


@dataclass
class EpochRecord:
    epoch: int
    steps: int
    losses: dict[str, float]
    sparsity: float
    score_min: float
    score_max: float
    heldout: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "epoch": self.epoch,
            "steps": self.steps,
            "losses": self.losses,
            "sparsity": self.sparsity,
            "score_min": self.score_min,
            "score_max": self.score_max,
            "heldout": self.heldout,
        }


class Trainer:
    """
    Owns the generator, the discriminator, their optimizers and the shuffling RNG.

    All randomness derives from ``cfg.seed``: one child seed initializes the
    weights, the other drives batch order and dropout.
    """

    def __init__(self, cfg: TrainConfig, settings: Settings | None = None):
        self.cfg = cfg.validate()
        self.settings = settings or Settings()
        init_seed, run_seed = np.random.SeedSequence(cfg.seed).spawn(2)
        init_rng = np.random.default_rng(init_seed)
        self.rng = np.random.default_rng(run_seed)

        self.params = ModelParams(dtype=cfg.np_dtype)
        self.generator = Generator(cfg.generator, self.params, init_rng)
        self.discriminator = Discriminator(cfg.discriminator, self.params, init_rng)
        opt = cfg.optimizer
        self.g_opt = AdamW(
            self.params.view(f"{GENERATOR_PREFIX}."),
            lr=opt.lr_generator, betas=opt.betas, eps=opt.eps, weight_decay=opt.weight_decay,
        )
        self.d_opt = AdamW(
            self.params.view(f"{DISCRIMINATOR_PREFIX}."),
            lr=opt.lr_discriminator, betas=opt.betas, eps=opt.eps, weight_decay=opt.weight_decay,
        )
        self.epoch = 0
        self.history: list[EpochRecord] = []
        logger.info(
            "Trainer ready: generator %d params, discriminator %d params",
            param_count(self.params, GENERATOR_PREFIX),
            param_count(self.params, DISCRIMINATOR_PREFIX),
        )

    # ------------------------------------------------------------------
    # one step
    # ------------------------------------------------------------------
    def _fake_labels(self, clean: np.ndarray, enhanced: np.ndarray) -> float | np.ndarray:
        if self.cfg.label_mode == "adversarial":
            return 0.0
        rate = self.cfg.dataset.sample_rate
        return np.array([
            metric_proxy_label(AudioClip(c, rate), AudioClip(e, rate))
            for c, e in zip(clean, enhanced)
        ])

    def train_step(self, batch: Sequence[SynthPair]) -> LossReport:
        """
        One discriminator update followed by one generator update.

        Raises:
            NonFiniteLossError: Naming the first non-finite score or loss
            SpectralNormError: If a normalized discriminator kernel leaves unit norm
        """
        cfg, gcfg = self.cfg, self.cfg.generator
        length = min(len(p.clean) for p in batch)
        clean = np.stack([p.clean.samples[:length] for p in batch])
        noisy = np.stack([p.noisy.samples[:length] for p in batch])

        clean_spec = stft_frames(clean, gcfg.n_fft, gcfg.hop, gcfg.window)
        noisy_spec = stft_frames(noisy, gcfg.n_fft, gcfg.hop, gcfg.window)
        clean_phase = np.angle(clean_spec)
        clean_mag_c = power_compress(np.abs(clean_spec), gcfg.compression)
        noisy_mag, noisy_phase = np.abs(noisy_spec), np.angle(noisy_spec)

        # discriminator
        self.params.zero_grad()
        with no_grad():
            fixed = self.generator.forward_features(noisy_mag, noisy_phase, length)
        assert fixed.waveform is not None
        label = self._fake_labels(clean, fixed.waveform.data)
        real = self.discriminator(clean_mag_c, clean_mag_c, training=True, update_sn=True, rng=self.rng)
        fake = self.discriminator(clean_mag_c, fixed.magnitude_c.data, training=True, rng=self.rng)
        l_disc = discriminator_loss(real, fake, label)
        _require_finite([("score_real", real), ("score_fake", fake), ("l_discriminator", l_disc)])
        backward(l_disc)
        clip_grad_norm(self.d_opt.params, cfg.optimizer.clip_norm)
        self.d_opt.step()
        self.discriminator.check_spectral_norms()

        # generator
        self.params.zero_grad()
        out = self.generator.forward_features(noisy_mag, noisy_phase, length)
        score = self.discriminator(clean_mag_c, out.magnitude_c, training=True, rng=self.rng)
        l_metric = metric_loss(score)
        l_mag = magnitude_loss(clean_mag_c, out.magnitude_c)
        l_com = complex_loss(
            clean_mag_c * np.cos(clean_phase), clean_mag_c * np.sin(clean_phase), out.real_c, out.imag_c
        )
        phase = phase_loss(clean_phase, out.phase)
        l_time = time_loss(clean, out.waveform)
        l_gen = generator_loss(l_metric, l_mag, phase.total, l_com, l_time, cfg.loss_weights)
        _require_finite([
            ("mask", out.mask),
            ("waveform", out.waveform),
            ("score_generated", score),
            ("l_metric", l_metric),
            ("l_mag", l_mag),
            ("l_pha", phase.total),
            ("l_com", l_com),
            ("l_time", l_time),
            ("l_generator", l_gen),
        ])
        backward(l_gen)
        clip_grad_norm(self.g_opt.params, cfg.optimizer.clip_norm)
        self.g_opt.step()
        self.params.zero_grad()

        report = report_from_terms(l_time, l_mag, l_com, phase, l_metric, l_gen)
        report.l_discriminator = l_disc.item()
        scores = np.concatenate([real.data, fake.data, score.data])
        report.score_real = float(real.data.mean())
        report.score_fake = float(fake.data.mean())
        report.score_min = float(scores.min())
        report.score_max = float(scores.max())
        return report

    # ------------------------------------------------------------------
    # epochs
    # ------------------------------------------------------------------
    def dataset(self) -> tuple[list[SynthPair], list[SynthPair]]:
        """(train, heldout) pairs from ``dataset_dir`` or the synthetic spec."""
        cfg = self.cfg
        if cfg.dataset_dir:
            pairs = load_pair_directory(cfg.dataset_dir, cfg.dataset.sample_rate)
            shortest = cfg.min_clip_samples()
            short = [p.clip_id for p in pairs if len(p.clean) < shortest]
            if short:
                raise ConfigError(
                    f"Clips shorter than the discriminator needs ({shortest} samples): {', '.join(short)}"
                )
        else:
            pairs = synth_dataset(cfg.dataset, self.settings.workers)
        return split_heldout(pairs, cfg.dataset.heldout_fraction)

    def prune_for_epoch(self, epoch: int) -> float | None:
        """Apply the scheduled prune for ``epoch`` (1-based); returns the amount or None."""
        if not self.cfg.use_pruning:
            return None
        amount = self.cfg.prune.targets(self.cfg.epochs).get(epoch)
        if amount is None:
            return None
        apply_masks(self.params, l1_unstructured_prune(self.params, PRUNE_SCOPE, amount))
        return amount

    def sparsity(self) -> float:
        return sparsity_report(self.params, PRUNE_SCOPE).global_sparsity

    def run_epoch(self, pairs: Sequence[SynthPair]) -> list[LossReport]:
        order = self.rng.permutation(len(pairs))
        size = self.cfg.batch_size
        return [
            self.train_step([pairs[i] for i in order[start: start + size]])
            for start in range(0, len(order), size)
        ]

    def evaluate(self, pairs: Sequence[SynthPair]) -> EvalResult:
        return evaluate_generator(self.generator, pairs, self.settings.workers)

    def fit(
        self,
        train_pairs: Sequence[SynthPair],
        heldout: Sequence[SynthPair] = (),
        checkpoint_path: str | Path | None = None,
    ) -> list[EpochRecord]:
        """Train from ``self.epoch + 1`` to ``cfg.epochs``, checkpointing after each epoch."""
        cfg = self.cfg
        for epoch in range(self.epoch + 1, cfg.epochs + 1):
            pruned = self.prune_for_epoch(epoch)
            if pruned is not None:
                logger.info("Epoch %d: pruned conv weights to %.1f%%", epoch, 100 * pruned)
            reports = self.run_epoch(train_pairs)
            self.epoch = epoch
            record = EpochRecord(
                epoch=epoch,
                steps=len(reports),
                losses={
                    key: float(np.mean([getattr(r, key) for r in reports]))
                    for key in LossReport().to_dict()
                    if not key.startswith("score_")
                },
                sparsity=self.sparsity(),
                score_min=min(r.score_min for r in reports),
                score_max=max(r.score_max for r in reports),
            )
            if heldout and (epoch % cfg.eval_every == 0 or epoch == cfg.epochs):
                record.heldout = self.evaluate(heldout).summary()
            self.history.append(record)
            logger.info(
                "Epoch %d/%d: L_G %.4f L_D %.4f sparsity %.3f%s",
                epoch, cfg.epochs, record.losses["l_generator"], record.losses["l_discriminator"],
                record.sparsity,
                f" held-out SSNR {record.heldout['ssnr_enh']:.2f} dB" if record.heldout else "",
            )
            if checkpoint_path is not None:
                self.save(checkpoint_path)
        return self.history

    def save(self, path: str | Path) -> Path:
        path = save_checkpoint(self.to_checkpoint(), path)
        history_path(path).write_text(
            json.dumps([r.to_dict() for r in self.history], indent=2)
        )
        return path

    # ------------------------------------------------------------------
    # persistence
    # ------------------------------------------------------------------
    def to_checkpoint(self) -> Checkpoint:
        tensors: dict[str, np.ndarray] = {}
        for name, value in self.params.state_dict().items():
            tensors[f"param/{name}"] = value
        for p in self.params:
            if p.mask is not None:
                tensors[f"mask/{p.name}"] = p.mask.astype(np.uint8)
        for name, value in self.params.buffers.items():
            tensors[f"buffer/{name}"] = value.copy()
        for key, opt in (("generator", self.g_opt), ("discriminator", self.d_opt)):
            for name, value in opt.state_dict().items():
                tensors[f"optim/{key}/{name}"] = value.copy()
        return Checkpoint(
            config=self.cfg.to_dict(),
            tensors=tensors,
            epoch=self.epoch,
            steps={"generator": self.g_opt.step_count, "discriminator": self.d_opt.step_count},
            rng_state=self.rng.bit_generator.state,
        )

    def restore(self, ckpt: Checkpoint) -> None:
        """
        Load weights, masks, buffers, optimizer moments and RNG state.

        Everything is validated before anything is written.

        Raises:
            CheckpointError: On missing, unexpected or mis-shaped tensors
        """
        params = ckpt.params
        expected = set(self.params.names())
        if set(params) != expected:
            raise CheckpointError(
                f"Parameter mismatch: missing={sorted(expected - set(params))} "
                f"unexpected={sorted(set(params) - expected)}"
            )
        for name, value in params.items():
            if value.shape != self.params[name].shape:
                raise CheckpointError(f"'{name}' has shape {value.shape}, expected {self.params[name].shape}")
        masks = ckpt.masks
        for name, value in masks.items():
            if name not in expected or value.shape != self.params[name].shape:
                raise CheckpointError(f"Mask '{name}' does not match a parameter")
        buffers = ckpt.buffers
        if set(buffers) != set(self.params.buffers):
            raise CheckpointError("Buffer set does not match the model")
        optim = {
            "generator": ckpt.section("optim/generator"),
            "discriminator": ckpt.section("optim/discriminator"),
        }
        for key, opt in (("generator", self.g_opt), ("discriminator", self.d_opt)):
            if set(optim[key]) != set(opt.state_dict()):
                raise CheckpointError(f"Optimizer state for {key} does not match the model")

        self.params.load_state_dict({k: v.astype(self.params.dtype) for k, v in params.items()})
        for p in self.params:
            p.set_mask(masks.get(p.name))
        for name, value in buffers.items():
            self.params.buffers[name][...] = value
        self.g_opt.load_state_dict(optim["generator"], ckpt.steps.get("generator", 0))
        self.d_opt.load_state_dict(optim["discriminator"], ckpt.steps.get("discriminator", 0))
        if ckpt.rng_state:
            self.rng.bit_generator.state = ckpt.rng_state
        self.epoch = ckpt.epoch

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint, settings: Settings | None = None) -> "Trainer":
        trainer = cls(TrainConfig.from_dict(ckpt.config), settings)
        trainer.restore(ckpt)
        return trainer


@dataclass
class TrainResult:
    trainer: Trainer
    history: list[EpochRecord]
    checkpoint_path: Path | None = None

    @property
    def final_heldout(self) -> dict[str, float]:
        for record in reversed(self.history):
            if record.heldout:
                return record.heldout
        return {}


def train(
    cfg: TrainConfig,
    out: str | Path | None = None,
    settings: Settings | None = None,
) -> TrainResult:
    """Build the dataset, train every epoch, and persist checkpoint plus history when ``out`` is set."""
    trainer = Trainer(cfg, settings)
    train_pairs, heldout = trainer.dataset()
    logger.info("Training on %d clips, %d held out", len(train_pairs), len(heldout))
    history = trainer.fit(train_pairs, heldout, out)
    return TrainResult(trainer, history, Path(out) if out is not None else None)
