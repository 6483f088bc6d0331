"""Diffeomorphisms from frequency regions onto the kernel support.

Every map exposes the same surface: `forward` (xi -> u), `inverse`
(u -> xi), `on_grid` (forward evaluated on all grid samples),
`jacobian_det` and `mirror` (xi -> -gamma(-xi)). Points are arrays of
shape (..., N) in xi order (xi_1 first).
"""

from __future__ import annotations

from typing import Optional, Union

import attrs
import numpy as np
from scipy import ndimage

from ewt_kernels import KernelSupport
from ewt_log import log_warning
from ewt_spectral import FrequencyGrid, RealImage
from ewt_utils import EwtNumericalError, EwtValidationError

JACOBIAN_FLOOR = 1e-8
UNBOUNDED_MARGIN = 1.25
ROUNDTRIP_TOLERANCE = 0.5  # samples


def _matrix(value) -> np.ndarray:
    return np.atleast_2d(np.asarray(value, dtype=np.float64))


def _vector(value) -> np.ndarray:
    return np.atleast_1d(np.asarray(value, dtype=np.float64))


@attrs.define(frozen=True, eq=False)
class AffineMap:
    """gamma(xi) = A (xi - eta)."""

    matrix: np.ndarray = attrs.field(converter=_matrix)
    center: np.ndarray = attrs.field(converter=_vector)

    def __attrs_post_init__(self):
        if self.matrix.shape != (self.center.size, self.center.size):
            raise EwtValidationError(f"matrix {self.matrix.shape} does not match center {self.center.shape}")
        if not abs(np.linalg.det(self.matrix)) > 0:
            raise EwtNumericalError("affine map is singular")

    kind = "affine"

    @property
    def det(self) -> float:
        return float(abs(np.linalg.det(self.matrix)))

    def forward(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.center) @ self.matrix.T

    def inverse(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(u, dtype=np.float64) @ np.linalg.inv(self.matrix).T + self.center

    def on_grid(self, grid: FrequencyGrid) -> np.ndarray:
        return self.forward(grid.coordinates())

    def jacobian_det(self, grid: FrequencyGrid) -> np.ndarray:
        return np.full(grid.shape, self.det)

    def jacobian_det_at(self, points: np.ndarray) -> np.ndarray:
        return np.full(np.shape(points)[:-1], self.det)

    def mirror(self) -> "AffineMap":
        return AffineMap(self.matrix, -self.center)

    def metadata(self) -> dict:
        return {"kind": self.kind, "matrix": self.matrix.tolist(), "center": self.center.tolist()}


@attrs.define(frozen=True, eq=False)
class StarMap:
    """Radial rescaling about a center: gamma(xi) = s(theta) (xi - c).

    s is sampled at `scale.size` equally spaced angles and interpolated
    periodically; the Jacobian determinant is s(theta)^2.
    """

    center: np.ndarray = attrs.field(converter=_vector)
    scale: np.ndarray = attrs.field(converter=lambda v: np.asarray(v, dtype=np.float64))

    kind = "star"

    @property
    def angles(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.scale.size) / self.scale.size

    def _scale_at(self, d: np.ndarray) -> np.ndarray:
        theta = np.mod(np.arctan2(d[..., 1], d[..., 0]), 2.0 * np.pi)
        return np.interp(theta, self.angles, self.scale, period=2.0 * np.pi)

    def forward(self, points: np.ndarray) -> np.ndarray:
        d = np.asarray(points, dtype=np.float64) - self.center
        return self._scale_at(d)[..., None] * d

    def inverse(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        return u / self._scale_at(u)[..., None] + self.center

    def on_grid(self, grid: FrequencyGrid) -> np.ndarray:
        return self.forward(grid.coordinates())

    def jacobian_det(self, grid: FrequencyGrid) -> np.ndarray:
        return self.jacobian_det_at(grid.coordinates())

    def jacobian_det_at(self, points: np.ndarray) -> np.ndarray:
        return self._scale_at(np.asarray(points, dtype=np.float64) - self.center) ** 2

    def mirror(self) -> "StarMap":
        # -gamma(-xi) rescales the ray at theta with s(theta + pi)
        if self.scale.size % 2:
            raise EwtValidationError("star maps need an even angle count to mirror")
        return StarMap(-self.center, np.roll(self.scale, -(self.scale.size // 2)))

    def metadata(self) -> dict:
        return {"kind": self.kind, "center": self.center.tolist(), "angles": int(self.scale.size)}


def _fractional_index(points: np.ndarray, shape) -> np.ndarray:
    """xi points (..., 2) -> (2, ...) fractional (row, col) indices."""
    height, width = shape
    rows = points[..., 1] * height + height // 2
    cols = points[..., 0] * width + width // 2
    return np.stack([rows, cols])


def _interpolate(field: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Bilinear samples of a (H, W, 2) vector field at xi points; zero off-grid."""
    coords = _fractional_index(points, field.shape[:2])
    return np.stack(
        [ndimage.map_coordinates(field[..., k], coords, order=1, mode="constant", cval=0.0) for k in range(2)],
        axis=-1,
    )


@attrs.define(frozen=True, eq=False)
class DenseMap:
    """Dense map composed with an affine initializer.

    gamma(xi) = base(xi + forward_disp(xi)) and
    gamma^-1(u) = zeta + inverse_disp(zeta) with zeta = base^-1(u).
    Displacements are (H, W, 2) arrays in xi units, bilinearly interpolated.
    """

    base: AffineMap
    forward_disp: np.ndarray
    inverse_disp: np.ndarray
    residual: Optional[float] = None
    params: dict = attrs.field(factory=dict)
    _det_field: Optional[np.ndarray] = attrs.field(init=False, default=None, repr=False)

    kind = "demons"

    @property
    def grid(self) -> FrequencyGrid:
        return FrequencyGrid(self.forward_disp.shape[:2])

    def forward(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return self.base.forward(points + _interpolate(self.forward_disp, points))

    def inverse(self, u: np.ndarray) -> np.ndarray:
        zeta = self.base.inverse(u)
        return zeta + _interpolate(self.inverse_disp, zeta)

    def on_grid(self, grid: FrequencyGrid) -> np.ndarray:
        if grid.shape != self.forward_disp.shape[:2]:
            raise EwtValidationError(f"dense map lives on {self.grid.shape}, not {grid.shape}")
        return self.base.forward(grid.coordinates() + self.forward_disp)

    def _det_of_gradient(self, disp: np.ndarray) -> np.ndarray:
        height, width = disp.shape[:2]
        d1_dxi2, d1_dxi1 = np.gradient(disp[..., 0], 1.0 / height, 1.0 / width)
        d2_dxi2, d2_dxi1 = np.gradient(disp[..., 1], 1.0 / height, 1.0 / width)
        return (1.0 + d1_dxi1) * (1.0 + d2_dxi2) - d1_dxi2 * d2_dxi1

    def raw_jacobian_det(self) -> np.ndarray:
        """Central-difference determinant field before flooring."""
        return self.base.det * self._det_of_gradient(self.forward_disp)

    def jacobian_det(self, grid: FrequencyGrid) -> np.ndarray:
        """Floored determinant field, computed and warned about once per map."""
        if grid.shape != self.forward_disp.shape[:2]:
            raise EwtValidationError(f"dense map lives on {self.grid.shape}, not {grid.shape}")
        if self._det_field is None:
            det = self.raw_jacobian_det()
            low = det < JACOBIAN_FLOOR
            if np.any(low):
                log_warning(f"jacobian floored at {JACOBIAN_FLOOR} on {int(low.sum())} samples")
                det = np.where(low, JACOBIAN_FLOOR, det)
            det.setflags(write=False)
            object.__setattr__(self, "_det_field", det)
        return self._det_field

    def jacobian_det_at(self, points: np.ndarray) -> np.ndarray:
        field = np.repeat(self.jacobian_det(self.grid)[..., None], 2, axis=-1)
        values = _interpolate(field, np.asarray(points, dtype=np.float64))[..., 0]
        # off-grid points fall back to the affine initializer
        coords = _fractional_index(np.asarray(points, dtype=np.float64), self.forward_disp.shape[:2])
        inside = np.all(
            [(coords[k] >= 0) & (coords[k] <= self.forward_disp.shape[k] - 1) for k in range(2)], axis=0
        )
        return np.where(inside, np.maximum(values, JACOBIAN_FLOOR), self.base.det)

    def mirror(self) -> "DenseMap":
        grid = self.grid
        return DenseMap(
            base=self.base.mirror(),
            forward_disp=-grid.mirror(self.forward_disp),
            inverse_disp=-grid.mirror(self.inverse_disp),
            residual=self.residual,
            params=dict(self.params),
        )

    def metadata(self) -> dict:
        return {
            "kind": self.kind,
            "base": self.base.metadata(),
            "residual": self.residual,
            "params": self.params,
        }


Diffeomorphism = Union[AffineMap, StarMap, DenseMap]


def identity_map(ndim: int = 2) -> AffineMap:
    return AffineMap(np.eye(ndim), np.zeros(ndim))


def translation_map(center) -> AffineMap:
    """Unit-determinant map xi -> xi - center."""
    center = _vector(center)
    return AffineMap(np.eye(center.size), center)


def interval_map(omega: float, width: float) -> AffineMap:
    """1D map (xi - omega) / width."""
    return AffineMap([[1.0 / width]], [omega])


def reversed_interval_map(omega: float, width: float) -> AffineMap:
    """1D map (omega - xi) / width, the orientation-reversing variant."""
    return AffineMap([[-1.0 / width]], [omega])


def _bounding_box(region, grid: FrequencyGrid):
    coords = grid.coordinates()[region.mask]
    if coords.size == 0:
        raise EwtValidationError(f"region {region.index} is empty")
    half_cell = grid.spacing / 2.0
    return coords.min(axis=0) - half_cell, coords.max(axis=0) + half_cell


def affine_map_for_region(region, support: KernelSupport, margin: Optional[float] = None) -> AffineMap:
    """Diagonal affine map sending the region's bounding box into the support's box.

    eta is the region centroid; the scale per axis uses the larger distance
    from eta to the box edges. Unbounded regions default to a margin of
    UNBOUNDED_MARGIN so the support sits strictly inside the image.
    """
    grid = FrequencyGrid(region.mask.shape)
    lo, hi = _bounding_box(region, grid)
    eta = np.asarray(region.centroid, dtype=np.float64)
    half = np.maximum(eta - lo, hi - eta)
    if not np.all(half > 0):
        raise EwtNumericalError(f"region {region.index} has a degenerate bounding box")
    if margin is None:
        margin = 1.0 if region.bounded else UNBOUNDED_MARGIN
    return AffineMap(np.diag(margin * support.half_extent / half), eta)


def star_shaped_map(
    region, support: KernelSupport, num_angles: int = 720, step: float = 0.05
) -> StarMap:
    """Analytic radial map about the centroid for star-shaped regions.

    Boundary radii come from a ray scan over the rasterized mask with
    `step` (in samples) resolution.
    """
    mask = region.mask
    if mask.ndim != 2:
        raise EwtValidationError("star-shaped maps are two-dimensional")
    grid = FrequencyGrid(mask.shape)
    center = np.asarray(region.centroid, dtype=np.float64)
    coords = grid.coordinates()[mask]
    reach = float(np.max(np.linalg.norm(coords - center, axis=-1))) + float(grid.spacing.max())
    dt = step * float(grid.spacing.min())
    t = np.arange(0.0, reach + 2 * dt, dt)
    theta = 2.0 * np.pi * np.arange(num_angles) / num_angles
    directions = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    points = center + t[None, :, None] * directions[:, None, :]

    height, width = mask.shape
    cols = np.floor(points[..., 0] * width + 0.5).astype(int) + width // 2
    rows = np.floor(points[..., 1] * height + 0.5).astype(int) + height // 2
    on_grid = (rows >= 0) & (rows < height) & (cols >= 0) & (cols < width)
    inside = np.zeros(on_grid.shape, dtype=bool)
    inside[on_grid] = mask[rows[on_grid], cols[on_grid]]

    if not np.all(inside[:, 0]):
        raise EwtValidationError(
            f"region {region.index} does not contain its centroid; use the demons estimator"
        )
    # a star-shaped region is left exactly once along every ray
    exits = np.argmin(inside, axis=1)
    exits = np.where(np.all(inside, axis=1), t.size, exits)
    after = np.arange(t.size)[None, :] >= exits[:, None]
    if np.any(inside & after):
        raise EwtValidationError(
            f"region {region.index} is not star-shaped about its centroid; use the demons estimator"
        )
    rho = t[exits - 1] + dt / 2.0
    return StarMap(center, support.radius_at(theta) / rho)


def jacobian_det_field(gamma: Diffeomorphism, grid: FrequencyGrid) -> RealImage:
    return RealImage(gamma.jacobian_det(grid))


def mirror_map(gamma: Diffeomorphism) -> Diffeomorphism:
    return gamma.mirror()


def preimage_indicator(gamma: Diffeomorphism, support: KernelSupport, grid: FrequencyGrid) -> np.ndarray:
    """Samples xi with gamma(xi) inside the support."""
    return support.contains(gamma.on_grid(grid))


def roundtrip_error(gamma: Diffeomorphism, mask: np.ndarray) -> float:
    """Largest |gamma^-1(gamma(xi)) - xi| over the masked samples, in samples."""
    grid = FrequencyGrid(mask.shape)
    points = grid.coordinates()[mask]
    if points.size == 0:
        return 0.0
    if isinstance(gamma, DenseMap):
        u = gamma.on_grid(grid)[mask]
    else:
        u = gamma.forward(points)
    back = gamma.inverse(u)
    return float(np.max(np.abs((back - points) / grid.spacing)))
