"""Harmonic mode detection on the log spectrum through scale-space persistence."""

from __future__ import annotations

import itertools
from typing import Dict, List, Optional, Tuple

import attrs
import numpy as np
from scipy import ndimage

from ewt_log import log_to_output, log_warning
from ewt_spectral import FrequencyGrid, RealImage
from ewt_utils import EwtValidationError


def _positive(_instance, attribute, value):
    if not value > 0:
        raise EwtValidationError(f"{attribute.name} must be positive, got {value}")


@attrs.define(frozen=True)
class ScaleSpaceParams:
    """Gaussian ladder sigma_k = k * scale_step, k = 1..num_levels."""

    s0: float = attrs.field(default=0.8, converter=float, validator=_positive)
    scale_step: float = attrs.field(default=0.1, converter=float, validator=_positive)
    num_levels: int = attrs.field(default=32, converter=int)
    min_separation: float = attrs.field(default=2.0, converter=float, validator=_positive)
    # birth threshold on (value - median) / (max - median) at level 1
    min_contrast: float = attrs.field(default=0.35, converter=float)

    @num_levels.validator
    def _levels(self, _attribute, value):
        if value < 2:
            raise EwtValidationError(f"num_levels must be at least 2, got {value}")

    @min_contrast.validator
    def _contrast(self, _attribute, value):
        if not 0 <= value < 1:
            raise EwtValidationError(f"min_contrast must lie in [0, 1), got {value}")


@attrs.define(frozen=True)
class Mode:
    xi: Tuple[float, ...] = attrs.field(converter=lambda v: tuple(float(x) for x in v))
    persistence: float = 0.0
    amplitude: float = 0.0


@attrs.define(frozen=True)
class ModeSet:
    """Detected modes on a grid of the given array shape, strongest first."""

    modes: Tuple[Mode, ...] = attrs.field(converter=tuple)
    shape: Tuple[int, ...] = attrs.field(converter=tuple)
    symmetric: bool = False

    @property
    def grid(self) -> FrequencyGrid:
        return FrequencyGrid(self.shape)

    @property
    def contains_dc(self) -> bool:
        return any(all(x == 0 for x in m.xi) for m in self.modes)

    def indices(self) -> List[Tuple[int, ...]]:
        grid = self.grid
        return [grid.index_of(m.xi) for m in self.modes]

    def __len__(self) -> int:
        return len(self.modes)


def _is_upper(index: Tuple[int, ...], grid: FrequencyGrid) -> bool:
    """Canonical half: xi_2 > 0, or xi_2 == 0 and xi_1 > 0 (xi_1 > 0 alone in 1D)."""
    xi = grid.xi_of(index)
    if grid.ndim == 1:
        return xi[0] > 0
    return xi[1] > 0 or (xi[1] == 0 and xi[0] > 0)


def _mirror(index: Tuple[int, ...], grid: FrequencyGrid) -> Tuple[int, ...]:
    return tuple(int(grid.mirror_index(a)[i]) for a, i in enumerate(index))


def _sort_key(index, mode: Mode, grid: FrequencyGrid):
    return (-mode.amplitude, not _is_upper(index, grid), index)


def _sorted_set(found: Dict[Tuple[int, ...], Mode], grid: FrequencyGrid, symmetric: bool) -> ModeSet:
    ordered = sorted(found.items(), key=lambda item: _sort_key(item[0], item[1], grid))
    return ModeSet([m for _, m in ordered], grid.shape, symmetric)


def strict_maxima(values: np.ndarray) -> np.ndarray:
    """Periodic strict local maxima over the full neighborhood.

    Equal neighbors are resolved in favor of the smaller flat index, so a
    plateau yields its lexicographically first sample.
    """
    flat = np.arange(values.size).reshape(values.shape)
    result = np.ones(values.shape, dtype=bool)
    for offset in itertools.product((-1, 0, 1), repeat=values.ndim):
        if not any(offset):
            continue
        shift = tuple(-o for o in offset)
        axes = tuple(range(values.ndim))
        neighbor = np.roll(values, shift, axis=axes)
        neighbor_flat = np.roll(flat, shift, axis=axes)
        result &= (values > neighbor) | ((values == neighbor) & (flat < neighbor_flat))
    return result


def _dc_only(grid: FrequencyGrid) -> ModeSet:
    return ModeSet([Mode(grid.xi_of(grid.center))], grid.shape, True)


def detect_modes(log_spec: RealImage, params: ScaleSpaceParams = ScaleSpaceParams()) -> ModeSet:
    """Maxima of the smoothed log spectrum that live longer than s0 in scale space."""
    data = log_spec.data
    grid = FrequencyGrid(data.shape)
    if np.ptp(data) == 0:
        log_to_output("flat spectrum: DC mode only")
        return _dc_only(grid)

    symmetric = 0.5 * (data + grid.mirror(data))
    levels = [
        ndimage.gaussian_filter(symmetric, k * params.scale_step, mode="wrap")
        for k in range(1, params.num_levels + 1)
    ]
    first = levels[0]
    floor = float(np.median(first))
    dynamic = float(first.max()) - floor
    if dynamic <= 0:
        return _dc_only(grid)

    contrast = (first - floor) / dynamic
    born = strict_maxima(first) & (contrast > params.min_contrast)
    positions = [np.argwhere(strict_maxima(level)) for level in levels[1:]]

    found: Dict[Tuple[int, ...], Mode] = {}
    for start in map(tuple, np.argwhere(born)):
        if start != grid.center and not _is_upper(start, grid):
            continue
        position = np.asarray(start)
        lifetime = 1
        for maxima in positions:
            if maxima.size == 0:
                break
            dist = np.linalg.norm(maxima - position, axis=1)
            nearest = int(np.argmin(dist))
            if dist[nearest] > params.min_separation:
                break
            position = maxima[nearest]
            lifetime += 1
        persistence = lifetime * params.scale_step
        if persistence <= params.s0 and start != grid.center:
            continue
        mode = Mode(grid.xi_of(start), persistence, float(first[start] - floor))
        found[start] = mode
        mirror = _mirror(start, grid)
        if mirror == start:
            if start != grid.center:
                log_warning(f"mode at {mode.xi} is its own mirror and is dropped")
                del found[start]
            continue
        found[mirror] = attrs.evolve(mode, xi=grid.xi_of(mirror))

    if grid.center not in found:
        found[grid.center] = Mode(grid.xi_of(grid.center), 0.0, float(first[grid.center] - floor))
    log_to_output(f"detected {len(found)} modes")
    return _sorted_set(found, grid, True)


def _snap(xi: np.ndarray, grid: FrequencyGrid) -> Tuple[int, ...]:
    """Nearest grid index, rounding halves upward."""
    index = []
    for a in range(grid.ndim):
        n = grid.shape[a]
        i = int(np.floor(xi[grid.ndim - 1 - a] * n + 0.5)) + n // 2
        index.append(min(max(i, 0), n - 1))
    return tuple(index)


def _merge(found: Dict, index, mode: Mode, grid: FrequencyGrid) -> None:
    if index in found:
        old = found[index]
        mode = Mode(grid.xi_of(index), max(old.persistence, mode.persistence), max(old.amplitude, mode.amplitude))
    found[index] = attrs.evolve(mode, xi=grid.xi_of(index))


def symmetrize_modes(modes: ModeSet, min_separation: float = 2.0) -> ModeSet:
    """Force +/- pairs, average near-symmetric pairs and add DC."""
    grid = modes.grid
    dc = grid.center
    pending = {
        index: mode for index, mode in zip(modes.indices(), modes.modes) if index != dc
    }
    order = sorted(pending, key=lambda index: _sort_key(index, pending[index], grid))
    found: Dict[Tuple[int, ...], Mode] = {}
    used = set()
    for index in order:
        if index in used:
            continue
        used.add(index)
        mode = pending[index]
        mirror = _mirror(index, grid)
        if mirror == index:
            log_warning(f"mode at {mode.xi} is its own mirror and is dropped")
            continue

        partner: Optional[Tuple[int, ...]] = None
        if mirror in pending and mirror not in used:
            partner = mirror
        else:
            candidates = [i for i in pending if i not in used]
            if candidates:
                dist = np.linalg.norm(np.asarray(candidates) - np.asarray(mirror), axis=1)
                nearest = int(np.argmin(dist))
                if dist[nearest] <= min_separation:
                    partner = candidates[nearest]

        amplitude, persistence = mode.amplitude, mode.persistence
        keep = index
        if partner is not None:
            used.add(partner)
            other = pending[partner]
            amplitude = max(amplitude, other.amplitude)
            persistence = max(persistence, other.persistence)
            if partner != mirror:
                first, second = (index, partner) if _is_upper(index, grid) or not _is_upper(partner, grid) else (partner, index)
                average = (np.asarray(grid.xi_of(first)) - np.asarray(grid.xi_of(second))) / 2.0
                keep = _snap(average, grid)
        paired = Mode(grid.xi_of(keep), persistence, amplitude)
        mirror_keep = _mirror(keep, grid)
        if keep == dc or mirror_keep == keep:
            continue
        _merge(found, keep, paired, grid)
        _merge(found, mirror_keep, paired, grid)

    dc_modes = [m for index, m in zip(modes.indices(), modes.modes) if index == dc]
    _merge(found, dc, dc_modes[0] if dc_modes else Mode(grid.xi_of(dc)), grid)
    return _sorted_set(found, grid, True)
