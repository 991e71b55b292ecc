"""Global L1 unstructured pruning of convolution weights."""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .autodiff.params import ModelParams, Parameter, param_count
from .exceptions import PruningError, ShapeError
from .logging_utils import get_logger

logger = get_logger(__name__)

PRUNE_KINDS = ("conv",)
DEFAULT_AMOUNT = 0.3

# one name prefix, several prefixes pruned as one pool, or everything
Scope = str | tuple[str, ...] | None


@dataclass
class PruneMask:
    """Binary masks keyed by parameter name (1 keeps a weight, 0 removes it)."""

    masks: dict[str, np.ndarray] = field(default_factory=dict)
    amount: float = 0.0
    scope: Scope = None

    @property
    def total(self) -> int:
        return sum(m.size for m in self.masks.values())

    @property
    def zeros(self) -> int:
        return sum(int(m.size - np.count_nonzero(m)) for m in self.masks.values())

    @property
    def sparsity(self) -> float:
        return self.zeros / self.total if self.total else 0.0


def prune_scope(params: ModelParams, scope: Scope = None) -> list[Parameter]:
    """Conv weights under the ``scope`` name prefix(es), sorted by name."""
    return sorted(params.select(scope, kinds=PRUNE_KINDS), key=lambda p: p.name)


def l1_unstructured_prune(
    params: ModelParams, scope: Scope = None, amount: float = DEFAULT_AMOUNT
) -> PruneMask:
    """
    Rank every in-scope weight by |w| and mask the smallest floor(amount * N).

    Ranking is global across parameters. Ties go to the parameter whose name
    sorts first, then to the lower row-major index. Already-masked weights
    are zero and therefore stay masked.

    Raises:
        PruningError: If ``amount`` is outside [0, 1) or the scope is empty
    """
    if not 0.0 <= amount < 1.0:
        raise PruningError(f"Prune amount must be in [0, 1), got {amount}")
    targets = prune_scope(params, scope)
    if not targets:
        raise PruningError(f"No conv weights match scope {scope!r}")

    magnitudes = np.concatenate([np.abs(p.data).reshape(-1) for p in targets])
    count = int(math.floor(amount * magnitudes.size + 1e-9))
    keep = np.ones(magnitudes.size)
    keep[np.argsort(magnitudes, kind="stable")[:count]] = 0.0

    masks: dict[str, np.ndarray] = {}
    offset = 0
    for p in targets:
        masks[p.name] = keep[offset: offset + p.size].reshape(p.shape)
        offset += p.size
    return PruneMask(masks=masks, amount=amount, scope=scope)


def apply_masks(params: ModelParams, mask: PruneMask) -> None:
    """
    Attach masks so forward passes see w * mask and optimizers keep masked entries at 0.

    Raises:
        PruningError: On unknown parameter names or shape mismatches
    """
    for name, m in mask.masks.items():
        if name not in params:
            raise PruningError(f"Mask refers to unknown parameter '{name}'")
        try:
            params[name].set_mask(m)
        except ShapeError as e:
            raise PruningError(str(e)) from e
        params[name].enforce_mask()
    logger.info(
        "Applied prune masks: %d/%d weights removed (%.1f%%)",
        mask.zeros, mask.total, 100.0 * mask.sparsity,
    )


def clear_masks(params: ModelParams) -> None:
    for p in params:
        p.set_mask(None)


def current_mask(params: ModelParams, scope: Scope = None) -> PruneMask:
    """Masks currently attached to in-scope parameters (all-ones where none is set)."""
    return PruneMask(
        masks={
            p.name: p.mask.copy() if p.mask is not None else np.ones(p.shape)
            for p in prune_scope(params, scope)
        },
        scope=scope,
    )


def iterative_amounts(amount: float, steps: int) -> list[float]:
    """Cumulative targets of ``steps`` equal increments ending at ``amount``."""
    if steps < 1:
        raise PruningError(f"Iterative pruning needs at least one step, got {steps}")
    return [amount * (i + 1) / steps for i in range(steps)]


def iterative_prune(
    params: ModelParams, scope: Scope = None, amount: float = DEFAULT_AMOUNT, steps: int = 3
) -> PruneMask:
    """Prune in ``steps`` equal increments, re-ranking after each one."""
    mask = PruneMask(amount=0.0, scope=scope)
    for target in iterative_amounts(amount, steps):
        mask = l1_unstructured_prune(params, scope, target)
        apply_masks(params, mask)
    return mask


@dataclass
class SparsityEntry:
    name: str
    size: int
    zeros: int

    @property
    def sparsity(self) -> float:
        return self.zeros / self.size if self.size else 0.0


@dataclass
class SparsityReport:
    entries: list[SparsityEntry]
    raw_count: int
    effective_count: int

    @property
    def scope_size(self) -> int:
        return sum(e.size for e in self.entries)

    @property
    def scope_zeros(self) -> int:
        return sum(e.zeros for e in self.entries)

    @property
    def global_sparsity(self) -> float:
        return self.scope_zeros / self.scope_size if self.scope_size else 0.0

    @property
    def effective_ratio(self) -> float:
        return self.effective_count / self.raw_count if self.raw_count else 1.0

    def to_text(self) -> str:
        lines = [f"{e.name}={e.sparsity:.4f} ({e.zeros}/{e.size})" for e in self.entries]
        lines += [
            f"global_sparsity={self.global_sparsity:.4f}",
            f"raw_params={self.raw_count}",
            f"effective_params={self.effective_count}",
        ]
        return "\n".join(lines)


def sparsity_report(params: ModelParams, scope: Scope = None) -> SparsityReport:
    """Per-parameter and global zero fractions of the masks over the prune scope."""
    entries = [
        SparsityEntry(
            name=p.name,
            size=p.size,
            zeros=int(p.size - np.count_nonzero(p.mask)) if p.mask is not None else 0,
        )
        for p in prune_scope(params, scope)
    ]
    return SparsityReport(
        entries=entries,
        raw_count=param_count(params, scope),
        effective_count=param_count(params, scope, effective=True),
    )
