from __future__ import annotations

from dataclasses import dataclass, fields
import os
from typing import Any, Mapping, TypeVar

from .exceptions import ConfigError


@dataclass
class Settings:
    """Process-wide settings read from the environment."""

    seed: int | None = None
    log_level: str = "INFO"
    workers: int = 1  # thread fan-out for synthesis and evaluation

    @classmethod
    def from_env(cls) -> "Settings":
        """Load settings from environment variables."""
        seed_raw = os.getenv("EFGN_SEED") or None
        log_level = os.getenv("EFGN_LOG_LEVEL", "INFO")
        workers_raw = os.getenv("EFGN_WORKERS", "1")

        try:
            seed = int(seed_raw) if seed_raw is not None else None
            workers = int(workers_raw)
        except ValueError as e:
            raise ConfigError(f"Invalid integer in environment: {e}") from e
        if workers < 1:
            raise ConfigError(f"EFGN_WORKERS must be >= 1, got {workers}")

        return cls(seed=seed, log_level=log_level.upper(), workers=workers)


T = TypeVar("T")


def dataclass_from_dict(cls: type[T], data: Mapping[str, Any], context: str | None = None) -> T:
    """
    Build a flat dataclass from a mapping, turning lists into tuples.

    Raises:
        ConfigError: On unknown keys or values the dataclass rejects
    """
    if not isinstance(data, Mapping):
        raise ConfigError(f"{context or cls.__name__} must be an object, got {type(data).__name__}")
    known = {f.name for f in fields(cls)}  # type: ignore[arg-type]
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"Unknown keys in {context or cls.__name__}: {', '.join(unknown)}")
    values = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
    try:
        return cls(**values)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid {context or cls.__name__}: {e}") from e
