"""Logging and notification for the empirical wavelet tool."""

from __future__ import annotations

import contextlib
import logging
import os
import sys
from typing import Iterator, List, Optional

LOGGER = logging.getLogger("ewt")

# Stack of active collectors, innermost last.
_COLLECTORS: List[List[str]] = []


def _notify(message: str, allowed: List[str]) -> None:
    if os.getenv("EWT_SHOW_NOTIFICATION", "off") in allowed:
        print(message, file=sys.stderr)


def log_to_output(message: str, level: int = logging.INFO) -> None:
    LOGGER.log(level, message)


def log_error(message: str) -> None:
    LOGGER.error(message)
    _notify(message, ["onError", "onWarning", "always"])


def log_warning(message: str) -> None:
    LOGGER.warning(message)
    for collector in _COLLECTORS:
        collector.append(message)
    _notify(message, ["onWarning", "always"])


def log_always(message: str) -> None:
    LOGGER.info(message)
    _notify(message, ["always"])


@contextlib.contextmanager
def captured_warnings() -> Iterator[List[str]]:
    """Collect every warning issued through `log_warning` inside the block."""
    collected: List[str] = []
    _COLLECTORS.append(collected)
    try:
        yield collected
    finally:
        _COLLECTORS.remove(collected)


def configure(verbose: bool = False, stream: Optional[object] = None) -> None:
    """Attach a stderr handler to the package logger once."""
    if not LOGGER.handlers:
        handler = logging.StreamHandler(stream or sys.stderr)
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        LOGGER.addHandler(handler)
    LOGGER.setLevel(logging.DEBUG if verbose else logging.INFO)
