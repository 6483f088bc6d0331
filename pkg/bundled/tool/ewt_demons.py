"""Demons estimation of dense maps from a region onto the kernel support.

The moving image is the indicator of the region, the fixed image the
indicator of the affine preimage of the support. Classic Thirion forces
with Gaussian regularization of the accumulated field run over a
multiresolution pyramid; smoothing and depth are picked by grid search on
the quadratic risk (number of mismatched indicator samples). Fields that
fold or do not invert within half a sample are never returned.
"""

from __future__ import annotations

from typing import Tuple

import attrs
import numpy as np
from scipy import ndimage

from ewt_kernels import KernelSupport
from ewt_log import log_to_output, log_warning
from ewt_mapping import (
    JACOBIAN_FLOOR,
    ROUNDTRIP_TOLERANCE,
    DenseMap,
    _interpolate,
    affine_map_for_region,
    preimage_indicator,
    roundtrip_error,
)
from ewt_spectral import FrequencyGrid
from ewt_utils import EwtNumericalError, EwtValidationError

CROP_MARGIN = 6
# np.gradient needs two samples per axis
MIN_LEVEL_SAMPLES = 2


def _positive_tuple(_instance, attribute, value):
    if not value or any(v <= 0 for v in value):
        raise EwtValidationError(f"{attribute.name} must be a nonempty tuple of positive values")


def _default_smoothing() -> Tuple[float, ...]:
    return tuple(float(v) for v in np.round(np.arange(0.3, 0.7001, 0.05), 2))


@attrs.define(frozen=True)
class MappingFitParams:
    """Grid-search space and iteration schedule of the demons estimator."""

    smoothing: Tuple[float, ...] = attrs.field(
        factory=_default_smoothing, converter=tuple, validator=_positive_tuple
    )
    # pyramid depths searched: n_P - offset
    level_offsets: Tuple[int, ...] = attrs.field(default=(2, 1, 0), converter=tuple)
    first_iterations_exponent: int = 4
    presmooth: float = 1.0
    inverse_iterations: int = 8
    patience: int = 8
    tolerance: float = 1e-4

    @level_offsets.validator
    def _offsets(self, _attribute, value):
        if not value or any(v < 0 for v in value):
            raise EwtValidationError("level_offsets must be a nonempty tuple of non-negative integers")

    def pyramid_depth(self, shape) -> int:
        """Largest n with 2**n < min(shape)."""
        smallest = min(shape)
        depth = 0
        while 2 ** (depth + 1) < smallest:
            depth += 1
        return depth

    def level_grid(self, shape) -> Tuple[int, ...]:
        """Pyramid depths n_P - offset, without the ones the image cannot hold."""
        depth = self.pyramid_depth(shape)
        levels = []
        for offset in sorted(set(self.level_offsets), reverse=True):
            count = depth - offset
            if count < 1 or _coarsest(shape, count) < MIN_LEVEL_SAMPLES:
                log_to_output(f"skipping the {count}-level pyramid on a {tuple(shape)} window")
                continue
            levels.append(count)
        return tuple(levels)

    def iterations(self, levels: int) -> Tuple[int, ...]:
        """Iterations per level, coarsest first."""
        return tuple(2 ** (self.first_iterations_exponent + k) for k in range(levels))


def _coarsest(shape, levels: int) -> int:
    """Smallest side of the coarsest image of a `levels`-deep pyramid."""
    size = min(shape)
    for _ in range(levels - 1):
        size = (size + 1) // 2
    return size


def _downsample(image: np.ndarray) -> np.ndarray:
    return ndimage.gaussian_filter(image, 1.0)[::2, ::2]


def _resize_field(disp: np.ndarray, shape) -> np.ndarray:
    factors = (shape[0] / disp.shape[0], shape[1] / disp.shape[1])
    return np.stack(
        [ndimage.zoom(disp[..., k], factors, order=1) * factors[k] for k in range(2)], axis=-1
    )


def _warp(image: np.ndarray, disp: np.ndarray, order: int = 1) -> np.ndarray:
    rows, cols = np.indices(image.shape, dtype=np.float64)
    return ndimage.map_coordinates(image, [rows + disp[..., 0], cols + disp[..., 1]], order=order, mode="nearest")


def _mismatch(fixed: np.ndarray, moving: np.ndarray, disp: np.ndarray) -> float:
    warped = _warp(moving, disp, order=0) > 0.5
    return float(np.count_nonzero(warped != (fixed > 0.5)))


def _demons_level(fixed, moving, disp, sigma, iterations, params: MappingFitParams):
    grad_r, grad_c = np.gradient(fixed)
    grad_sq = grad_r**2 + grad_c**2
    best_disp, best_ssd = disp, None
    history = []
    for _ in range(iterations):
        diff = _warp(moving, disp) - fixed
        ssd = float(np.mean(diff**2))
        if best_ssd is None or ssd < best_ssd:
            best_disp, best_ssd = disp, ssd
        history.append(ssd)
        if len(history) > params.patience:
            previous = history[-params.patience - 1]
            if previous - ssd <= params.tolerance * max(previous, 1e-300):
                break
        denom = grad_sq + diff**2
        scale = np.divide(diff, denom, out=np.zeros_like(diff), where=denom > 1e-9)
        update = -np.stack([scale * grad_r, scale * grad_c], axis=-1)
        disp = disp + update
        disp = np.stack([ndimage.gaussian_filter(disp[..., k], sigma) for k in range(2)], axis=-1)
    final = float(np.mean((_warp(moving, disp) - fixed) ** 2))
    if best_ssd is not None and final > history[0]:
        log_warning(f"demons level diverged (ssd {history[0]:.4g} -> {final:.4g}); keeping best iterate")
        return best_disp
    if best_ssd is not None and best_ssd < final:
        return best_disp
    return disp


def _register(fixed, moving, sigma: float, levels: int, params: MappingFitParams) -> np.ndarray:
    fixed_s = ndimage.gaussian_filter(fixed, params.presmooth)
    moving_s = ndimage.gaussian_filter(moving, params.presmooth)
    pyramid = [(fixed_s, moving_s)]
    for _ in range(levels - 1):
        pyramid.append((_downsample(pyramid[-1][0]), _downsample(pyramid[-1][1])))
    disp = np.zeros(pyramid[-1][0].shape + (2,))
    for (level_fixed, level_moving), iterations in zip(reversed(pyramid), params.iterations(levels)):
        if disp.shape[:2] != level_fixed.shape:
            disp = _resize_field(disp, level_fixed.shape)
        disp = _demons_level(level_fixed, level_moving, disp, sigma, iterations, params)
    return disp


def _crop_window(mask: np.ndarray, margin: int):
    rows, cols = np.nonzero(mask)
    r0, r1 = max(rows.min() - margin, 0), min(rows.max() + margin + 1, mask.shape[0])
    c0, c1 = max(cols.min() - margin, 0), min(cols.max() + margin + 1, mask.shape[1])
    inner = (rows.min() - r0, rows.max() - r0 + 1, cols.min() - c0, cols.max() - c0 + 1)
    return (slice(r0, r1), slice(c0, c1)), inner


def _taper(shape, inner, margin: int) -> np.ndarray:
    """1 on the inner box, cosine ramp to 0 over `margin` samples outside it."""
    profiles = []
    for n, lo, hi in ((shape[0], inner[0], inner[1]), (shape[1], inner[2], inner[3])):
        idx = np.arange(n)
        dist = np.maximum(np.maximum(lo - idx, idx - (hi - 1)), 0)
        profiles.append(0.5 * (1 + np.cos(np.pi * np.clip(dist / margin, 0, 1))))
    return np.outer(profiles[0], profiles[1])


def _invert(inverse_disp: np.ndarray, grid: FrequencyGrid, iterations: int) -> np.ndarray:
    """Fixed-point solve of v = -s(xi + v)."""
    coords = grid.coordinates()
    forward = -inverse_disp
    for _ in range(iterations):
        forward = -_interpolate(inverse_disp, coords + forward)
    return forward


def _to_grid(disp: np.ndarray, window, grid: FrequencyGrid) -> np.ndarray:
    """Cropped (row, col) sample displacements -> full-grid xi displacements."""
    height, width = grid.shape
    inverse_disp = np.zeros(grid.shape + (2,))
    inverse_disp[window + (0,)] = disp[..., 1] / width
    inverse_disp[window + (1,)] = disp[..., 0] / height
    return inverse_disp


def _first_fold_free(region, base, grid: FrequencyGrid, window, candidates, params: MappingFitParams):
    """First candidate, by increasing risk, that inverts within tolerance without flooring."""
    affine_residual = candidates[0][0]
    rejected = 0
    for rank in sorted(range(len(candidates)), key=lambda k: (candidates[k][0], k)):
        residual, sigma, levels, disp = candidates[rank]
        inverse_disp = _to_grid(disp, window, grid)
        gamma = DenseMap(
            base=base,
            forward_disp=_invert(inverse_disp, grid, params.inverse_iterations),
            inverse_disp=inverse_disp,
            residual=residual,
            params={
                "smoothing": sigma,
                "levels": levels,
                "iterations": list(params.iterations(levels)),
                "affine_residual": affine_residual,
                "initializer": "affine",
                "rejected": rejected,
            },
        )
        error = roundtrip_error(gamma, region.mask)
        smallest = float(gamma.raw_jacobian_det().min())
        if error <= ROUNDTRIP_TOLERANCE and smallest >= JACOBIAN_FLOOR:
            return gamma, rejected
        rejected += 1
        log_to_output(
            f"region {region.index}: smoothing {sigma}, levels {levels} folds"
            f" (round trip {error:.3f} samples, min det {smallest:.3g})"
        )
    raise EwtNumericalError(f"region {region.index}: the affine map itself fails the round trip")


def estimate_diffeomorphism_demons(
    region, support: KernelSupport, params: MappingFitParams = MappingFitParams()
) -> DenseMap:
    """Dense map of a bounded region onto the support, affine-initialized.

    Candidates are tried by increasing quadratic risk, search order breaking
    ties. The first one whose round trip stays within ROUNDTRIP_TOLERANCE and
    whose unfloored Jacobian stays above JACOBIAN_FLOOR is returned; the
    affine-only candidate always qualifies.
    """
    if not region.bounded:
        raise EwtValidationError(f"region {region.index} touches the grid border; demons needs a bounded region")
    if region.mask.ndim != 2:
        raise EwtValidationError("demons estimation is two-dimensional")
    grid = FrequencyGrid(region.mask.shape)
    base = affine_map_for_region(region, support)
    target = preimage_indicator(base, support, grid)
    window, inner = _crop_window(region.mask | target, CROP_MARGIN)
    fixed = target[window].astype(np.float64)
    moving = region.mask[window].astype(np.float64)
    if min(fixed.shape) < 4:
        raise EwtValidationError(f"region {region.index} is too small for the requested pyramid")

    zero = np.zeros(fixed.shape + (2,))
    affine_residual = _mismatch(fixed, moving, zero)
    taper = _taper(fixed.shape, inner, CROP_MARGIN)[..., None]
    depths = params.level_grid(fixed.shape)
    candidates = [(affine_residual, 0.0, 0, zero)]
    for sigma in sorted(params.smoothing):
        for levels in depths:
            disp = _register(fixed, moving, sigma, levels, params) * taper
            candidates.append((_mismatch(fixed, moving, disp), sigma, levels, disp))

    gamma, rejected = _first_fold_free(region, base, grid, window, candidates, params)
    chosen = gamma.params
    if rejected and chosen["levels"] == 0:
        log_warning(f"region {region.index}: every better demons field folds; keeping the affine map")
    log_to_output(
        f"region {region.index}: demons residual {gamma.residual:.0f} (affine {affine_residual:.0f}),"
        f" smoothing {chosen['smoothing']}, levels {chosen['levels']}"
    )
    return gamma
