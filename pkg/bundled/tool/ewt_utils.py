"""Utility functions and classes shared by the empirical wavelet tool."""

from __future__ import annotations

import contextlib
import hashlib
import time
from typing import Dict, Iterator

import numpy as np


class EwtError(Exception):
    """Base error of the tool."""


class EwtValidationError(EwtError, ValueError):
    """Input, configuration or partition failed validation."""


class EwtNumericalError(EwtError, ArithmeticError):
    """A numerical precondition does not hold (non-finite values, singular maps)."""


class StageError(EwtError):
    """Failure inside a named pipeline stage."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


def require_finite(values: np.ndarray, what: str) -> None:
    """Raise when `values` holds NaN or infinities."""
    if not np.all(np.isfinite(values)):
        raise EwtNumericalError(f"{what} contains non-finite values")


def content_hash(*arrays: np.ndarray) -> str:
    """Stable hex digest over array shapes, dtypes and bytes."""
    digest = hashlib.blake2b(digest_size=16)
    for array in arrays:
        array = np.ascontiguousarray(array)
        digest.update(str(array.shape).encode())
        digest.update(array.dtype.str.encode())
        digest.update(array.tobytes())
    return digest.hexdigest()


@contextlib.contextmanager
def timed_stage(name: str, timings: Dict[str, float]) -> Iterator[None]:
    """Record wall-clock seconds of the block and tag failures with the stage."""
    start = time.perf_counter()
    try:
        yield
    except StageError:
        raise
    except Exception as exc:  # pylint: disable=broad-except
        raise StageError(name, exc) from exc
    finally:
        timings[name] = time.perf_counter() - start


def root_cause(error: BaseException) -> BaseException:
    """Unwrap stage errors down to the original exception."""
    while isinstance(error, StageError):
        error = error.cause
    return error
