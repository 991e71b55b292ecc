from __future__ import annotations

import logging
import os

from rich.logging import RichHandler

LOGGER_NAME = "efgn"
DEFAULT_LEVEL = logging.INFO


def _resolve_level(level: int | str | None) -> int:
    if level is None:
        level = os.getenv("EFGN_LOG_LEVEL") or DEFAULT_LEVEL
    if isinstance(level, str):
        resolved = logging.getLevelName(level.upper())
        if not isinstance(resolved, int):
            return DEFAULT_LEVEL
        return resolved
    return level


def get_logger(name: str | None = None) -> logging.Logger:
    """Return a package logger; the ``efgn`` root gets a rich handler once."""
    root = logging.getLogger(LOGGER_NAME)
    if not root.handlers:
        handler = RichHandler(show_path=False, rich_tracebacks=False)
        handler.setFormatter(logging.Formatter("%(name)s - %(message)s"))
        root.addHandler(handler)
        root.setLevel(_resolve_level(None))
        root.propagate = False
    return logging.getLogger(name or LOGGER_NAME)


def configure_logging(level: int | str | None = None) -> logging.Logger:
    root = get_logger()
    root.setLevel(_resolve_level(level))
    return root
