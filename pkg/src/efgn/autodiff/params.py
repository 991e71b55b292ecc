"""Named parameter registry shared by the generator and discriminator."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Literal

import numpy as np

from ..exceptions import ShapeError
from .tensor import Tensor, as_tensor

ParamKind = Literal["conv", "bias", "norm", "prelu", "lsigmoid", "attention", "linear"]


@dataclass(eq=False)
class Parameter:
    """A trainable tensor addressed by a dot-separated name."""

    name: str
    tensor: Tensor
    kind: ParamKind = "conv"
    mask: np.ndarray | None = None  # owned by efgn.pruning

    @property
    def data(self) -> np.ndarray:
        return self.tensor.data

    @property
    def grad(self) -> np.ndarray | None:
        return self.tensor.grad

    @property
    def shape(self) -> tuple[int, ...]:
        return self.tensor.shape

    @property
    def size(self) -> int:
        return self.tensor.size

    def effective(self) -> Tensor:
        """The weight seen by forward passes: ``tensor * mask`` when masked."""
        if self.mask is None:
            return self.tensor
        return self.tensor * as_tensor(self.mask, like=self.tensor)

    def set_mask(self, mask: np.ndarray | None) -> None:
        if mask is not None:
            if mask.shape != self.shape:
                raise ShapeError(
                    f"Mask shape {mask.shape} does not match parameter '{self.name}' {self.shape}"
                )
            mask = mask.astype(self.tensor.dtype)
        self.mask = mask

    def enforce_mask(self) -> None:
        if self.mask is not None:
            self.tensor.data *= self.mask


@dataclass
class ModelParams:
    """
    Registry of parameters plus non-trainable buffers.

    Names are unique; iteration order is registration order, which is also
    the order used by optimizers and checkpoints.
    """

    dtype: np.dtype = field(default_factory=lambda: np.dtype(np.float64))
    _params: dict[str, Parameter] = field(default_factory=dict)
    buffers: dict[str, np.ndarray] = field(default_factory=dict)

    def add(self, name: str, value: np.ndarray, kind: ParamKind = "conv") -> Parameter:
        if name in self._params:
            raise KeyError(f"Duplicate parameter name: {name}")
        tensor = Tensor(np.asarray(value, dtype=self.dtype), requires_grad=True, name=name)
        param = Parameter(name=name, tensor=tensor, kind=kind)
        self._params[name] = param
        return param

    def add_buffer(self, name: str, value: np.ndarray) -> np.ndarray:
        if name in self.buffers:
            raise KeyError(f"Duplicate buffer name: {name}")
        self.buffers[name] = np.asarray(value, dtype=self.dtype)
        return self.buffers[name]

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __contains__(self, name: object) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[Parameter]:
        return iter(self._params.values())

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def view(self, prefix: str) -> "ModelParams":
        """Registry sharing the parameters and buffers whose names start with ``prefix``."""
        sub = ModelParams(dtype=self.dtype)
        sub._params = {n: p for n, p in self._params.items() if n.startswith(prefix)}
        sub.buffers = {n: b for n, b in self.buffers.items() if n.startswith(prefix)}
        return sub

    def select(
        self, prefix: str | tuple[str, ...] | None = None, kinds: tuple[str, ...] | None = None
    ) -> list[Parameter]:
        """Parameters whose names start with ``prefix`` (or any of several prefixes)."""
        return [
            p for p in self._params.values()
            if (prefix is None or p.name.startswith(prefix))
            and (kinds is None or p.kind in kinds)
        ]

    def zero_grad(self) -> None:
        for param in self._params.values():
            param.tensor.zero_grad()

    def enforce_masks(self) -> None:
        for param in self._params.values():
            param.enforce_mask()

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self._params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        missing = set(self._params) - set(state)
        unexpected = set(state) - set(self._params)
        if missing or unexpected:
            raise KeyError(
                f"State mismatch: missing={sorted(missing)} unexpected={sorted(unexpected)}"
            )
        for name, value in state.items():
            param = self._params[name]
            if value.shape != param.shape:
                raise ShapeError(
                    f"Loaded '{name}' has shape {value.shape}, expected {param.shape}"
                )
            param.tensor.data[...] = value


def param_count(
    params: ModelParams, prefix: str | tuple[str, ...] | None = None, effective: bool = False
) -> int:
    """
    Count parameters, optionally restricted to one name prefix or a tuple of them.

    With ``effective=True`` masked-out entries are not counted.
    """
    total = 0
    for param in params.select(prefix):
        if effective and param.mask is not None:
            total += int(np.count_nonzero(param.mask))
        else:
            total += param.size
    return total


def uniform_init(
    rng: np.random.Generator, shape: tuple[int, ...], fan_in: int
) -> np.ndarray:
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape)
