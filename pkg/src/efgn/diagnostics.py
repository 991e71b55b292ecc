"""
Finite-difference gradient suite behind ``efgn gradcheck``.

Every case builds float64 inputs from a seeded generator, reduces the op's
output to a scalar with fixed random weights, and compares tape gradients
with central differences.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from rich.table import Table

from .autodiff import functional as F
from .autodiff.gradcheck import GradCheckReport, grad_check_report
from .autodiff.params import ModelParams
from .autodiff.tensor import (
    Tensor, atan2, concat, cos, exp, log, matmul, reshape, sigmoid, sin, sqrt, stack, transpose,
)
from .dsp.stft import istft_tensor, power_compress, stft_frames
from .exceptions import ConfigError
from .logging_utils import get_logger
from .losses import (
    complex_loss,
    discriminator_loss,
    generator_loss,
    magnitude_loss,
    metric_loss,
    phase_loss,
    time_loss,
)
from .model.config import DiscriminatorConfig, GeneratorConfig
from .model.conformer import ConformerBlock
from .model.discriminator import Discriminator, spectral_normalize
from .model.generator import Generator

logger = get_logger(__name__)

SUITE_MODULES = ("numcore", "generator", "discriminator", "losses")
OP_TOLERANCE = 1e-4
END_TO_END_TOLERANCE = 1e-3

CaseFn = Callable[[np.random.Generator], GradCheckReport]


@dataclass
class CheckCase:
    module: str
    name: str
    run: CaseFn
    tolerance: float = OP_TOLERANCE


@dataclass
class CheckOutcome:
    module: str
    name: str
    report: GradCheckReport
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.report.passed(self.tolerance)


def _leaf(rng: np.random.Generator, shape: tuple[int, ...], name: str, scale: float = 1.0) -> Tensor:
    return Tensor(rng.uniform(-scale, scale, size=shape), requires_grad=True, name=name)


def _weighted(out: Tensor, weights: np.ndarray) -> Tensor:
    return (out * Tensor(weights)).sum()


def _check(
    rng: np.random.Generator, build: Callable[[], Tensor], inputs: list[Tensor], **kwargs: object
) -> GradCheckReport:
    return grad_check_report(build, inputs, rng=rng, **kwargs)  # type: ignore[arg-type]


# ---------------------------------------------------------------------------
# numcore
# ---------------------------------------------------------------------------
def _arithmetic(rng: np.random.Generator) -> GradCheckReport:
    a, b = _leaf(rng, (3, 4), "a"), _leaf(rng, (4,), "b")
    w = rng.normal(size=(3, 4))
    return _check(rng, lambda: _weighted((a + b) * a - a / (b * b + 1.5) + (a ** 3.0), w), [a, b])


def _elementwise(rng: np.random.Generator) -> GradCheckReport:
    x, y = _leaf(rng, (2, 5), "x"), _leaf(rng, (2, 5), "y")
    w = rng.normal(size=(2, 5))

    def build() -> Tensor:
        out = exp(x) + log(x * x + 1.0) + sqrt(y * y + 0.5) + sin(x) * cos(y) + sigmoid(y)
        return _weighted(out + atan2(y, x + 2.0), w)

    return _check(rng, build, [x, y])


def _shapes(rng: np.random.Generator) -> GradCheckReport:
    x, y = _leaf(rng, (2, 3, 4), "x"), _leaf(rng, (2, 3, 4), "y")
    w = rng.normal(size=(2, 4, 6))

    def build() -> Tensor:
        joined = concat([transpose(x, (0, 2, 1)), transpose(y, (0, 2, 1))], axis=2)
        stacked = stack([x.sum(axis=1), y.mean(axis=1)], axis=0)
        return _weighted(joined, w) + (reshape(stacked, (4, 4))[1:, ::2] ** 2.0).sum()

    return _check(rng, build, [x, y])


def _matmul(rng: np.random.Generator) -> GradCheckReport:
    a, b = _leaf(rng, (2, 3, 4), "a"), _leaf(rng, (4, 5), "b")
    w = rng.normal(size=(2, 3, 5))
    return _check(rng, lambda: _weighted(matmul(a, b), w), [a, b])


def _conv2d(rng: np.random.Generator) -> GradCheckReport:
    x = _leaf(rng, (2, 4, 6, 5), "x")
    weight = _leaf(rng, (6, 2, 3, 3), "weight")
    bias = _leaf(rng, (6,), "bias")
    out_shape = F.conv2d(x, weight, bias, (1, 2), (2, 1), (2, 1), groups=2).shape
    w = rng.normal(size=out_shape)
    return _check(
        rng, lambda: _weighted(F.conv2d(x, weight, bias, (1, 2), (2, 1), (2, 1), groups=2), w),
        [x, weight, bias],
    )


def _depthwise(rng: np.random.Generator) -> GradCheckReport:
    x = _leaf(rng, (1, 3, 5, 6), "x")
    dw, pw = _leaf(rng, (3, 1, 3, 3), "dw"), _leaf(rng, (4, 3, 1, 1), "pw")
    seq, kernel = _leaf(rng, (2, 7, 3), "seq"), _leaf(rng, (3, 3), "kernel")
    w1 = rng.normal(size=(1, 4, 5, 6))
    w2 = rng.normal(size=(2, 7, 3))

    def build() -> Tensor:
        return (
            _weighted(F.depthwise_separable_conv2d(x, dw, pw, padding=1), w1)
            + _weighted(F.depthwise_conv1d(seq, kernel), w2)
        )

    return _check(rng, build, [x, dw, pw, seq, kernel])


def _norms(rng: np.random.Generator) -> GradCheckReport:
    x = _leaf(rng, (2, 3, 4, 5), "x")
    gamma, beta = _leaf(rng, (3,), "gamma"), _leaf(rng, (3,), "beta")
    s = _leaf(rng, (2, 5, 4), "s")
    g2, b2 = _leaf(rng, (4,), "g2"), _leaf(rng, (4,), "b2")
    w1, w2, w3 = rng.normal(size=(2, 3, 4, 5)), rng.normal(size=(2, 5, 4)), rng.normal(size=(2, 5, 4))

    def build() -> Tensor:
        return (
            _weighted(F.instance_norm(x, gamma, beta), w1)
            + _weighted(F.layer_norm(s, g2, b2), w2)
            + _weighted(F.sequence_norm(s, g2, b2), w3)
        )

    return _check(rng, build, [x, gamma, beta, s, g2, b2])


def _activations(rng: np.random.Generator) -> GradCheckReport:
    x = _leaf(rng, (3, 6), "x")
    alpha, slope = _leaf(rng, (6,), "alpha"), _leaf(rng, (6,), "slope")
    w = rng.normal(size=(3, 6))
    w_glu = rng.normal(size=(3, 3))

    def build() -> Tensor:
        out = F.prelu(x, alpha) + F.learnable_sigmoid(x, slope, 1.2) + F.swish(x) + F.softmax(x, axis=-1)
        return _weighted(out, w) + _weighted(F.glu(x, axis=-1), w_glu)

    return _check(rng, build, [x, alpha, slope])


def _resampling(rng: np.random.Generator) -> GradCheckReport:
    x = _leaf(rng, (1, 2, 3, 4), "x")
    y = _leaf(rng, (1, 2, 5, 6), "y")
    w1, w2 = rng.normal(size=(1, 2, 3, 8)), rng.normal(size=(1, 2, 2, 3))

    def build() -> Tensor:
        return _weighted(F.upsample_nearest(x, 2, axis=-1), w1) + _weighted(F.adaptive_max_pool2d(y, (2, 3)), w2)

    return _check(rng, build, [x, y])


def _istft(rng: np.random.Generator) -> GradCheckReport:
    real, imag = _leaf(rng, (2, 5, 9), "real"), _leaf(rng, (2, 5, 9), "imag")
    w = rng.normal(size=(2, 16))
    return _check(rng, lambda: _weighted(istft_tensor(real, imag, 16, 16, 4), w), [real, imag])


def _conformer(rng: np.random.Generator) -> GradCheckReport:
    params = ModelParams(dtype=np.dtype(np.float64))
    block = ConformerBlock(params, "block", dim=4, heads=2, kernel=3, rng=rng)
    x = _leaf(rng, (2, 5, 4), "x")
    w = rng.normal(size=(2, 5, 4))
    inputs = [x] + [p.tensor for p in params]
    return _check(rng, lambda: _weighted(block(x), w), inputs, floor=1e-8)


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------
def _micro_batch(rng: np.random.Generator, cfg: GeneratorConfig, length: int = 32) -> dict[str, np.ndarray]:
    t = np.arange(length) / 16000
    clean = np.stack([0.5 * np.sin(2 * np.pi * f0 * t) for f0 in (1500.0, 2700.0)])
    noisy = clean + 0.2 * rng.standard_normal(clean.shape)
    clean_spec = stft_frames(clean, cfg.n_fft, cfg.hop, cfg.window)
    noisy_spec = stft_frames(noisy, cfg.n_fft, cfg.hop, cfg.window)
    return {
        "clean": clean,
        "clean_phase": np.angle(clean_spec),
        "clean_mag_c": power_compress(np.abs(clean_spec), cfg.compression),
        "noisy_mag": np.abs(noisy_spec),
        "noisy_phase": np.angle(noisy_spec),
    }


def generator_end_to_end(rng: np.random.Generator, max_elements: int | None = None) -> GradCheckReport:
    """
    Full generator loss against every generator parameter on the micro config.

    ``max_elements`` caps the checked entries per tensor; the suite checks all of them.
    """
    cfg = GeneratorConfig.micro()
    params = ModelParams(dtype=np.dtype(np.float64))
    generator = Generator(cfg, params, rng)
    discriminator = Discriminator(DiscriminatorConfig.micro(), params, rng)
    b = _micro_batch(rng, cfg)
    target_real = b["clean_mag_c"] * np.cos(b["clean_phase"])
    target_imag = b["clean_mag_c"] * np.sin(b["clean_phase"])

    def build() -> Tensor:
        out = generator.forward_features(b["noisy_mag"], b["noisy_phase"], b["clean"].shape[-1])
        score = discriminator(b["clean_mag_c"], out.magnitude_c)
        return generator_loss(
            metric_loss(score),
            magnitude_loss(b["clean_mag_c"], out.magnitude_c),
            phase_loss(b["clean_phase"], out.phase).total,
            complex_loss(target_real, target_imag, out.real_c, out.imag_c),
            time_loss(b["clean"], out.waveform),
        )

    inputs = [p.tensor for p in params.select("generator")]
    # Conv biases feeding an instance norm have exactly zero gradient; the
    # floor keeps their numeric noise from dominating the relative error.
    return _check(rng, build, inputs, step=1e-6, floor=1e-6, max_elements=max_elements)


def _discriminator_end_to_end(rng: np.random.Generator) -> GradCheckReport:
    cfg = GeneratorConfig.micro()
    params = ModelParams(dtype=np.dtype(np.float64))
    discriminator = Discriminator(DiscriminatorConfig.micro(), params, rng)
    b = _micro_batch(rng, cfg)
    other = Tensor(b["clean_mag_c"] * rng.uniform(0.5, 1.5, size=b["clean_mag_c"].shape),
                   requires_grad=True, name="other")

    def build() -> Tensor:
        return discriminator_loss(
            discriminator(b["clean_mag_c"], b["clean_mag_c"]),
            discriminator(b["clean_mag_c"], other),
        )

    inputs = [other] + [p.tensor for p in params]
    return _check(rng, build, inputs, step=1e-6, floor=1e-6)


def _spectral_norm(rng: np.random.Generator) -> GradCheckReport:
    weight = _leaf(rng, (4, 2, 3, 3), "weight")
    u = rng.normal(size=4)
    u /= np.linalg.norm(u)
    spectral_normalize(weight, u, iters=5, update=True)
    v = weight.data.reshape(4, -1).T @ u
    v /= np.linalg.norm(v)
    w = rng.normal(size=(4, 2, 3, 3))
    return _check(
        rng, lambda: _weighted(spectral_normalize(weight, u, v, update=False).weight, w), [weight]
    )


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------
def _reconstruction_losses(rng: np.random.Generator) -> GradCheckReport:
    clean, target = rng.normal(size=(2, 20)), rng.uniform(0, 1, size=(2, 5, 6))
    est = _leaf(rng, (2, 20), "waveform")
    mag = Tensor(rng.uniform(0, 1, size=(2, 5, 6)), requires_grad=True, name="magnitude_c")
    re, im = _leaf(rng, (2, 5, 6), "real_c"), _leaf(rng, (2, 5, 6), "imag_c")
    tr, ti = rng.normal(size=(2, 5, 6)), rng.normal(size=(2, 5, 6))

    def build() -> Tensor:
        return time_loss(clean, est) + magnitude_loss(target, mag) + complex_loss(tr, ti, re, im)

    return _check(rng, build, [est, mag, re, im])


def _phase(rng: np.random.Generator) -> GradCheckReport:
    target = rng.uniform(-np.pi, np.pi, size=(2, 5, 6))
    est = _leaf(rng, (2, 5, 6), "phase", scale=np.pi)
    return _check(rng, lambda: phase_loss(target, est).total, [est])


def _adversarial(rng: np.random.Generator) -> GradCheckReport:
    real = Tensor(rng.uniform(0, 1, size=4), requires_grad=True, name="score_real")
    fake = Tensor(rng.uniform(0, 1, size=4), requires_grad=True, name="score_fake")
    terms = [Tensor(rng.uniform(0, 2), requires_grad=True, name=f"term{i}") for i in range(4)]

    def build() -> Tensor:
        return (
            discriminator_loss(real, fake, 0.25)
            + generator_loss(metric_loss(fake), *terms)
        )

    return _check(rng, build, [real, fake, *terms])


CASES: tuple[CheckCase, ...] = (
    CheckCase("numcore", "arithmetic", _arithmetic),
    CheckCase("numcore", "elementwise", _elementwise),
    CheckCase("numcore", "shapes", _shapes),
    CheckCase("numcore", "matmul", _matmul),
    CheckCase("numcore", "conv2d", _conv2d),
    CheckCase("numcore", "depthwise", _depthwise),
    CheckCase("numcore", "norms", _norms),
    CheckCase("numcore", "activations", _activations),
    CheckCase("numcore", "resampling", _resampling),
    CheckCase("numcore", "istft", _istft),
    CheckCase("generator", "conformer_block", _conformer),
    CheckCase("generator", "end_to_end", generator_end_to_end, END_TO_END_TOLERANCE),
    CheckCase("discriminator", "spectral_norm", _spectral_norm),
    CheckCase("discriminator", "end_to_end", _discriminator_end_to_end, END_TO_END_TOLERANCE),
    CheckCase("losses", "reconstruction", _reconstruction_losses),
    CheckCase("losses", "phase", _phase),
    CheckCase("losses", "adversarial", _adversarial),
)


def suite_cases(module: str = "all") -> list[CheckCase]:
    if module == "all":
        return list(CASES)
    if module not in SUITE_MODULES:
        raise ConfigError(f"Unknown gradcheck module '{module}'; expected all or one of {', '.join(SUITE_MODULES)}")
    return [c for c in CASES if c.module == module]


def run_suite(module: str = "all", seed: int = 0) -> list[CheckOutcome]:
    """Run every case of ``module`` with its own seeded generator."""
    outcomes = []
    for i, case in enumerate(suite_cases(module)):
        report = case.run(np.random.default_rng([seed, i]))
        outcome = CheckOutcome(case.module, case.name, report, case.tolerance)
        logger.debug(
            "gradcheck %s/%s: max rel error %.2e over %d elements (%d skipped)",
            case.module, case.name, report.max_rel_error, report.checked, report.skipped,
        )
        outcomes.append(outcome)
    return outcomes


def render_suite(outcomes: list[CheckOutcome]) -> Table:
    table = Table(title="Gradient check", show_header=True)
    table.add_column("Module", style="cyan")
    table.add_column("Case")
    table.add_column("Max rel error", justify="right")
    table.add_column("Checked", justify="right")
    table.add_column("Skipped", justify="right")
    table.add_column("Result")
    for o in outcomes:
        table.add_row(
            o.module, o.name, f"{o.report.max_rel_error:.2e}", str(o.report.checked),
            str(o.report.skipped), "[green]ok[/green]" if o.passed else "[red]FAIL[/red]",
        )
    return table
