"""Synthetic toy images with known harmonic modes."""

from __future__ import annotations

from typing import List, Tuple

import attrs
import numpy as np

from ewt_log import log_to_output
from ewt_modes import Mode, ModeSet
from ewt_spectral import FrequencyGrid, RealImage
from ewt_utils import EwtValidationError

MIN_RADIUS = 0.08
MAX_RADIUS = 0.4
MIN_SEPARATION = 0.08
MAX_DRAWS = 10000


def _at_least(minimum):
    def check(_instance, attribute, value):
        if value < minimum:
            raise EwtValidationError(f"{attribute.name} must be at least {minimum}, got {value}")

    return check


@attrs.define(frozen=True)
class ToyImageParams:
    width: int = attrs.field(default=256, converter=int, validator=_at_least(16))
    height: int = attrs.field(default=256, converter=int, validator=_at_least(16))
    num_waves: int = attrs.field(default=5, converter=int, validator=_at_least(1))
    seed: int = attrs.field(default=7, converter=int)
    noise: float = attrs.field(default=0.0, converter=float, validator=_at_least(0.0))


def _periodic_window(shape, sigma: float) -> np.ndarray:
    """Centered smooth periodic bump exp(kappa (cos(2 pi (x - c) / n) - 1)) per axis.

    kappa is matched so the bump has standard deviation `sigma` near its center.
    """
    out = np.ones(shape)
    for axis, n in enumerate(shape):
        kappa = (n / (2.0 * np.pi * sigma)) ** 2
        x = np.arange(n) - n // 2
        profile = np.exp(kappa * (np.cos(2.0 * np.pi * x / n) - 1.0))
        out = out * profile.reshape([-1 if a == axis else 1 for a in range(len(shape))])
    return out


def _is_canonical(k: Tuple[int, int]) -> bool:
    return k[1] > 0 or (k[1] == 0 and k[0] > 0)


def _draw_frequencies(rng: np.random.Generator, grid: FrequencyGrid, count: int) -> List[Tuple[int, int]]:
    """Integer bins (k_1, k_2) in the canonical half, well separated from each other, mirrors and DC."""
    width, height = grid.width, grid.height
    chosen: List[np.ndarray] = []
    bins: List[Tuple[int, int]] = []
    for _ in range(MAX_DRAWS):
        if len(bins) == count:
            break
        k = (int(rng.integers(-width // 2 + 1, width // 2)), int(rng.integers(0, height // 2)))
        if not _is_canonical(k):
            continue
        xi = np.array([k[0] / width, k[1] / height])
        if not MIN_RADIUS <= np.linalg.norm(xi) <= MAX_RADIUS:
            continue
        if any(min(np.linalg.norm(xi - c), np.linalg.norm(xi + c)) < MIN_SEPARATION for c in chosen):
            continue
        if np.linalg.norm(2 * xi) < MIN_SEPARATION:
            continue
        chosen.append(xi)
        bins.append(k)
    if len(bins) < count:
        raise EwtValidationError(f"cannot place {count} separated waves on a {width}x{height} grid")
    return bins


def make_toy_image(
    width: int = 256, height: int = 256, num_waves: int = 5, seed: int = 7, noise: float = 0.0
) -> Tuple[RealImage, ModeSet]:
    """Windowed plane waves on a smooth background, with the planted modes.

    Waves share a centered window of spread min(W, H) / 8; the background is
    a wider bump of spread min(W, H) / 6. Everything is periodic so the
    spectrum carries no wrap-around leakage. White Gaussian noise of standard
    deviation `noise` is added last.
    """
    params = ToyImageParams(width, height, num_waves, seed, noise)
    grid = FrequencyGrid((params.height, params.width))
    rng = np.random.default_rng(params.seed)
    bins = _draw_frequencies(rng, grid, params.num_waves)
    amplitudes = rng.uniform(0.5, 1.5, size=params.num_waves)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=params.num_waves)

    spread = min(params.width, params.height)
    window = _periodic_window(grid.shape, spread / 8.0)
    image = _periodic_window(grid.shape, spread / 6.0)
    rows, cols = np.indices(grid.shape)
    for (k1, k2), amplitude, phase in zip(bins, amplitudes, phases):
        argument = 2.0 * np.pi * (k1 * cols / params.width + k2 * rows / params.height) + phase
        image = image + amplitude * window * np.cos(argument)
    if params.noise > 0:
        image = image + params.noise * rng.standard_normal(grid.shape)

    modes = [Mode(grid.xi_of(grid.center), 0.0, 1.0)]
    for (k1, k2), amplitude in zip(bins, amplitudes):
        xi = (k1 / params.width, k2 / params.height)
        modes.append(Mode(xi, 0.0, float(amplitude)))
        modes.append(Mode((-xi[0], -xi[1]), 0.0, float(amplitude)))
    log_to_output(f"toy image {params.width}x{params.height}, {params.num_waves} waves, seed {params.seed}")
    return RealImage(image), ModeSet(modes, grid.shape, symmetric=True)
