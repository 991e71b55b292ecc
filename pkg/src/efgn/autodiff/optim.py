from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import ModelParams


def clip_grad_norm(params: ModelParams, max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most ``max_norm``."""
    grads = [p.grad for p in params if p.grad is not None]
    total = float(np.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2)) for g in grads)))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / (total + 1e-12)
        for g in grads:
            g *= scale
    return total


@dataclass
class AdamW:
    """Adaptive-moment optimiser with decoupled weight decay."""

    params: ModelParams
    lr: float = 1e-3
    betas: tuple[float, float] = (0.8, 0.99)
    eps: float = 1e-8
    weight_decay: float = 1e-4
    step_count: int = 0
    exp_avg: dict[str, np.ndarray] = field(default_factory=dict)
    exp_avg_sq: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for p in self.params:
            self.exp_avg.setdefault(p.name, np.zeros_like(p.data))
            self.exp_avg_sq.setdefault(p.name, np.zeros_like(p.data))

    def zero_grad(self) -> None:
        self.params.zero_grad()

    def step(self) -> None:
        self.step_count += 1
        beta1, beta2 = self.betas
        bias1 = 1.0 - beta1 ** self.step_count
        bias2 = 1.0 - beta2 ** self.step_count
        for p in self.params:
            if p.grad is None:
                continue
            grad = p.grad
            if p.mask is not None:
                grad = grad * p.mask
            m = self.exp_avg[p.name]
            v = self.exp_avg_sq[p.name]
            m *= beta1
            m += (1.0 - beta1) * grad
            v *= beta2
            v += (1.0 - beta2) * grad * grad
            if self.lr == 0.0:
                continue
            data = p.tensor.data
            data *= 1.0 - self.lr * self.weight_decay
            data -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)
            p.enforce_mask()

    def state_dict(self) -> dict[str, np.ndarray]:
        state: dict[str, np.ndarray] = {}
        for name in self.exp_avg:
            state[f"m.{name}"] = self.exp_avg[name]
            state[f"v.{name}"] = self.exp_avg_sq[name]
        return state

    def load_state_dict(self, state: dict[str, np.ndarray], step_count: int) -> None:
        for name in self.exp_avg:
            self.exp_avg[name][...] = state[f"m.{name}"]
            self.exp_avg_sq[name][...] = state[f"v.{name}"]
        self.step_count = step_count
