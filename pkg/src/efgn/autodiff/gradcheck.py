"""Central finite-difference verification of tape gradients."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..exceptions import GradCheckError
from .tensor import Tensor, backward, no_grad, reset_tape


@dataclass
class GradCheckReport:
    max_rel_error: float
    checked: int
    skipped: int  # elements whose one-sided slopes disagree (kink inside the step)
    worst: str | None = None

    def passed(self, tolerance: float) -> bool:
        return self.checked > 0 and self.max_rel_error < tolerance


def _evaluate(f: Callable[[], Tensor]) -> float:
    with no_grad():
        value = f()
    if value.size != 1:
        raise GradCheckError(f"grad_check needs a scalar function, got shape {value.shape}")
    out = float(value.data.reshape(-1)[0])
    if not np.isfinite(out):
        raise GradCheckError("Function evaluated to a non-finite value")
    return out


def grad_check_report(
    f: Callable[[], Tensor],
    inputs: Sequence[Tensor],
    step: float = 1e-5,
    floor: float = 1e-12,
    max_elements: int | None = None,
    kink_tolerance: float | None = 1e-3,
    rng: np.random.Generator | None = None,
) -> GradCheckReport:
    """
    Compare tape gradients of ``f`` with central differences.

    Args:
        f: Zero-argument function recomputing a scalar from ``inputs``
        inputs: Tensors (requires_grad) whose data is perturbed in place
        step: Finite-difference step
        floor: Lower bound of the relative-error denominator
        max_elements: Per-tensor cap on checked elements (random subset)
        kink_tolerance: Skip elements whose forward and backward one-sided
            slopes differ by more than this fraction of their magnitude;
            None disables the exclusion
        rng: Source of the random subset

    Returns:
        GradCheckReport with the maximum of
        |analytic - numeric| / max(|analytic|, |numeric|, floor)
    """
    rng = rng or np.random.default_rng(0)
    reset_tape()
    for t in inputs:
        t.grad = None
        if not t.data.flags.c_contiguous:
            t.data = np.ascontiguousarray(t.data)
    loss = f()
    if loss.size != 1:
        reset_tape()
        raise GradCheckError(f"grad_check needs a scalar function, got shape {loss.shape}")
    if not np.all(np.isfinite(loss.data)):
        raise GradCheckError("Function evaluated to a non-finite value")
    if loss.requires_grad:
        backward(loss)
    analytic = [
        t.grad.copy() if t.grad is not None else np.zeros_like(t.data) for t in inputs
    ]
    base = _evaluate(f)

    worst_err, worst_at = 0.0, None
    checked = skipped = 0
    for k, t in enumerate(inputs):
        flat = t.data.reshape(-1)
        indices = np.arange(flat.size)
        if max_elements is not None and flat.size > max_elements:
            indices = rng.choice(flat.size, size=max_elements, replace=False)
        for idx in indices:
            original = flat[idx]
            flat[idx] = original + step
            plus = _evaluate(f)
            flat[idx] = original - step
            minus = _evaluate(f)
            flat[idx] = original

            numeric = (plus - minus) / (2.0 * step)
            if kink_tolerance is not None:
                forward_slope = (plus - base) / step
                backward_slope = (base - minus) / step
                scale = max(abs(forward_slope), abs(backward_slope), floor)
                if abs(forward_slope - backward_slope) > kink_tolerance * scale + 1e3 * step * step:
                    skipped += 1
                    continue
            a = float(analytic[k].reshape(-1)[idx])
            err = abs(a - numeric) / max(abs(a), abs(numeric), floor)
            checked += 1
            if err > worst_err:
                worst_err = err
                worst_at = f"{t.name or f'input[{k}]'}[{idx}]"
    return GradCheckReport(max_rel_error=worst_err, checked=checked, skipped=skipped, worst=worst_at)


def grad_check(
    f: Callable[[], Tensor],
    inputs: Sequence[Tensor],
    step: float = 1e-5,
    **kwargs: object,
) -> float:
    """Maximum relative error between tape and central-difference gradients."""
    return grad_check_report(f, inputs, step, **kwargs).max_rel_error  # type: ignore[arg-type]
