"""Empirical and symmetric filter banks sampled on the frequency grid.

A plain filter is psi_n(xi) = sqrt|det J(xi)| * psi(gamma_n(xi)); a
symmetric filter is chi_n = (psi_n + psi_-n) / sqrt(2) with chi_0 = psi_0.
Filters are stored densely over the whole grid.
"""

from __future__ import annotations

from typing import Callable, Dict, List, Mapping, Optional, Tuple, Union

import attrs
import numpy as np

from ewt_kernels import KernelFunction, KernelSupport, WaveletKernel
from ewt_log import log_to_output
from ewt_mapping import AffineMap, Diffeomorphism, mirror_map
from ewt_spectral import ComplexField, FrequencyGrid
from ewt_utils import EwtNumericalError, EwtValidationError, content_hash, require_finite

# |psi_hat| at or below this fraction of the kernel peak is stored as 0
RELEVANCE_CUTOFF = 1e-14
SQRT2 = np.sqrt(2.0)


@attrs.define(frozen=True, eq=False)
class EmpiricalFilter:
    index: int
    values: np.ndarray
    map: Diffeomorphism
    gain: float = 1.0


@attrs.define(frozen=True, eq=False)
class SymmetricFilter:
    """chi_n with the plain filters it was built from (minus is None for n = 0)."""

    index: int
    values: np.ndarray
    plus: EmpiricalFilter
    minus: Optional[EmpiricalFilter] = None


Filter = Union[EmpiricalFilter, SymmetricFilter]


def _denominator(bank: "FilterBank") -> np.ndarray:
    total = np.zeros(bank.grid.shape)
    for item in bank.filters:
        total += np.abs(item.values) ** 2
    return total


def _lineage(bank: "FilterBank") -> str:
    return content_hash(
        np.asarray([item.index for item in bank.filters]), *[item.values for item in bank.filters]
    )


@attrs.define(frozen=True, eq=False)
class FilterBank:
    """Ordered, homogeneous family of filters with D(xi) = sum_n |filter_n(xi)|^2."""

    filters: Tuple[Filter, ...] = attrs.field(converter=tuple)
    kind: str = attrs.field(validator=attrs.validators.in_(["plain", "symmetric"]))
    kernel: WaveletKernel
    grid: FrequencyGrid
    mapper: str = "affine"
    partition_hash: Optional[str] = None
    bounded: Dict[int, bool] = attrs.field(factory=dict)
    denominator: np.ndarray = attrs.field(init=False, default=attrs.Factory(_denominator, takes_self=True))
    lineage: str = attrs.field(init=False, default=attrs.Factory(_lineage, takes_self=True))

    def __attrs_post_init__(self):
        if not self.filters:
            raise EwtNumericalError("filter bank is empty")
        expected = SymmetricFilter if self.kind == "symmetric" else EmpiricalFilter
        if not all(isinstance(item, expected) for item in self.filters):
            raise EwtValidationError(f"a {self.kind} bank must hold only {expected.__name__} items")
        indices = self.indices
        if len(set(indices)) != len(indices):
            raise EwtValidationError("duplicate filter indices")
        for item in self.filters:
            if item.values.shape != self.grid.shape:
                raise EwtValidationError(f"filter {item.index} has shape {item.values.shape}, grid is {self.grid.shape}")

    @property
    def indices(self) -> List[int]:
        return [item.index for item in self.filters]

    def __len__(self) -> int:
        return len(self.filters)

    def __getitem__(self, index: int) -> Filter:
        for item in self.filters:
            if item.index == index:
                return item
        raise EwtValidationError(f"no filter with index {index}")

    def is_bounded(self, index: int) -> bool:
        return bool(self.bounded.get(index, False))

    @property
    def cross_term(self) -> Optional[np.ndarray]:
        """sum_{n > 0} |psi_n| |psi_-n| for symmetric banks."""
        if self.kind != "symmetric":
            return None
        total = np.zeros(self.grid.shape)
        for item in self.filters:
            if item.minus is not None:
                total += np.abs(item.plus.values) * np.abs(item.minus.values)
        return total

    def evaluate(self, index: int, points: np.ndarray) -> np.ndarray:
        """Filter `index` at arbitrary xi points (..., N), re-derived from its maps."""
        item = self[index]
        if isinstance(item, SymmetricFilter):
            value = _evaluate_plain(self.kernel, item.plus, points)
            if item.minus is None:
                return value
            return (value + _evaluate_plain(self.kernel, item.minus, points)) / SQRT2
        return _evaluate_plain(self.kernel, item, points)

    def scaled(self, factor: float) -> "FilterBank":
        """Same bank with every filter multiplied by `factor`."""
        filters = []
        for item in self.filters:
            if isinstance(item, SymmetricFilter):
                plus = attrs.evolve(item.plus, values=item.plus.values * factor, gain=item.plus.gain * factor)
                minus = None
                if item.minus is not None:
                    minus = attrs.evolve(item.minus, values=item.minus.values * factor, gain=item.minus.gain * factor)
                filters.append(SymmetricFilter(item.index, item.values * factor, plus, minus))
            else:
                filters.append(attrs.evolve(item, values=item.values * factor, gain=item.gain * factor))
        return attrs.evolve(self, filters=filters)

    def without(self, *indices: int) -> "FilterBank":
        """Bank with the given filters deleted."""
        keep = [item for item in self.filters if item.index not in indices]
        return attrs.evolve(self, filters=keep)

    def manifest(self) -> dict:
        return {
            "kernel": self.kernel.name,
            "kind": self.kind,
            "mapper": self.mapper,
            "partition_hash": self.partition_hash,
            "lineage": self.lineage,
            "indices": self.indices,
            "shape": list(self.grid.shape),
        }


def _filter_values(kernel: WaveletKernel, u: np.ndarray, det: np.ndarray, gain: float) -> np.ndarray:
    psi = kernel(u)
    require_finite(psi, f"kernel '{kernel.name}'")
    values = gain * np.sqrt(np.abs(det)) * psi
    values = np.where(np.abs(psi) <= RELEVANCE_CUTOFF * kernel.peak, 0.0, values)
    require_finite(values, "filter")
    return values.astype(np.complex128)


def _evaluate_plain(kernel: WaveletKernel, item: EmpiricalFilter, points: np.ndarray) -> np.ndarray:
    return evaluate_filter(kernel, item.map, points, gain=item.gain)


def evaluate_filter(
    kernel: WaveletKernel, gamma: Diffeomorphism, points: np.ndarray, gain: float = 1.0
) -> np.ndarray:
    """sqrt|det J(xi)| * psi(gamma(xi)) at arbitrary xi points of shape (..., N)."""
    points = np.asarray(points, dtype=np.float64)
    return _filter_values(kernel, gamma.forward(points), gamma.jacobian_det_at(points), gain)


def build_filter(
    kernel: WaveletKernel, gamma: Diffeomorphism, grid: FrequencyGrid, n: int, gain: float = 1.0
) -> EmpiricalFilter:
    values = _filter_values(kernel, gamma.on_grid(grid), gamma.jacobian_det(grid), gain)
    return EmpiricalFilter(index=n, values=values, map=gamma, gain=gain)


def _label_key(n: int):
    return (abs(n), n < 0)


def build_plain_bank(
    kernel: WaveletKernel,
    maps: Mapping[int, Diffeomorphism],
    grid: FrequencyGrid,
    mapper: str = "affine",
    partition_hash: Optional[str] = None,
    bounded: Optional[Mapping[int, bool]] = None,
) -> FilterBank:
    """One EmpiricalFilter per map, in 0, 1, -1, 2, -2, ... order."""
    if not maps:
        raise EwtNumericalError("cannot build a bank without maps")
    filters = [build_filter(kernel, maps[n], grid, n) for n in sorted(maps, key=_label_key)]
    log_to_output(f"built {len(filters)} {kernel.name} filters ({mapper} maps)")
    return FilterBank(
        filters,
        kind="plain",
        kernel=kernel,
        grid=grid,
        mapper=mapper,
        partition_hash=partition_hash,
        bounded=dict(bounded or {}),
    )


def symmetric_maps(maps: Mapping[int, Diffeomorphism]) -> Dict[int, Diffeomorphism]:
    """Complete {n >= 0} maps with gamma_-n = -gamma_n(-xi)."""
    out = {}
    for n in sorted(maps, key=_label_key):
        if n < 0:
            continue
        out[n] = maps[n]
        if n > 0:
            out[-n] = mirror_map(maps[n])
    return out


def build_symmetric_bank(plain: FilterBank) -> FilterBank:
    """chi_0 = psi_0 and chi_n = (psi_n + psi_-n) / sqrt(2) for n > 0."""
    if plain.kind != "plain":
        raise EwtValidationError("symmetric banks are built from plain banks")
    by_index = {item.index: item for item in plain.filters}
    filters = []
    for n in sorted(by_index):
        if n < 0:
            if -n not in by_index:
                raise EwtValidationError(f"filter {n} has no mirror {-n}")
            continue
        item = by_index[n]
        if n == 0:
            filters.append(SymmetricFilter(0, item.values.copy(), item))
            continue
        if -n not in by_index:
            raise EwtValidationError(f"filter {n} has no mirror {-n}")
        mirror = by_index[-n]
        filters.append(SymmetricFilter(n, (item.values + mirror.values) / SQRT2, item, mirror))
    bounded = {n: plain.is_bounded(n) and plain.is_bounded(-n) for n in by_index if n >= 0}
    return FilterBank(
        filters,
        kind="symmetric",
        kernel=plain.kernel,
        grid=plain.grid,
        mapper=plain.mapper,
        partition_hash=plain.partition_hash,
        bounded=bounded,
    )


def lattice_spatial_kernel(
    kernel: WaveletKernel, gamma: AffineMap, grid: FrequencyGrid, chunk: int = 1024
) -> KernelFunction:
    """Riemann-sum inverse transform of the kernel over the mapped grid lattice.

    psi(y) ~ sum_k psi_hat(u_k) exp(2 pi i u_k . y) du with u_k = A (xi_k - eta)
    and du = |det A| / (W H); only nonzero kernel samples contribute.
    """
    u = gamma.on_grid(grid).reshape(-1, grid.ndim)
    weights = kernel(u)
    keep = weights != 0
    u, weights = u[keep], weights[keep] * gamma.det / grid.size

    def spatial(y):
        y = np.asarray(y, dtype=np.float64)
        flat = y.reshape(-1, grid.ndim)
        out = np.empty(flat.shape[0], dtype=np.complex128)
        for start in range(0, flat.shape[0], chunk):
            block = flat[start : start + chunk]
            out[start : start + chunk] = np.exp(2j * np.pi * block @ u.T) @ weights
        return out.reshape(y.shape[:-1])

    return spatial


def spatial_filter_affine(
    spatial: Callable[[np.ndarray], np.ndarray], matrix, center, grid: FrequencyGrid
) -> ComplexField:
    """psi_n(x) = |det A|^(-1/2) psi(A^-T x) exp(2 pi i eta . x) on the periodic sample grid."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    center = np.atleast_1d(np.asarray(center, dtype=np.float64))
    det = np.linalg.det(matrix)
    if not abs(det) > 0 or not np.isfinite(det):
        raise EwtNumericalError("spatial construction needs an invertible matrix")
    x = grid.spatial_coordinates()
    y = x @ np.linalg.inv(matrix)  # rows of x times A^-1 equal A^-T x
    values = np.asarray(spatial(y), dtype=np.complex128) * np.exp(2j * np.pi * (x @ center))
    values = values / np.sqrt(abs(det))
    require_finite(values, "spatial filter")
    return ComplexField(values, centered=False)


def spatial_symmetric_filter(
    spatial: Callable[[np.ndarray], np.ndarray], gamma: AffineMap, grid: FrequencyGrid
) -> ComplexField:
    """chi_n(x) from the affine map and its mirror."""
    plus = spatial_filter_affine(spatial, gamma.matrix, gamma.center, grid)
    mirror = mirror_map(gamma)
    minus = spatial_filter_affine(spatial, mirror.matrix, mirror.center, grid)
    return ComplexField((plus.data + minus.data) / SQRT2, centered=False)


def separable_kernel(
    kernel1d: Callable[[np.ndarray], np.ndarray],
    name: str,
    support: KernelSupport,
    compactly_supported: bool,
) -> WaveletKernel:
    """2D tensor-product kernel psi(u) = k(u_1) k(u_2)."""

    def evaluator(u):
        return np.asarray(kernel1d(u[..., 0])) * np.asarray(kernel1d(u[..., 1]))

    return WaveletKernel(
        name=f"{name}-separable",
        evaluator=evaluator,
        support=support,
        compactly_supported=compactly_supported,
        ndim=2,
    )


def dyadic_centers(omega0: float) -> Tuple[Tuple[float, float], ...]:
    return ((omega0, 0.0), (0.0, omega0), (omega0, omega0))


def dyadic_bank_2d(levels: int, omega0: float, kernel: WaveletKernel, grid: FrequencyGrid) -> FilterBank:
    """Separable bank with gamma_{j,n}(xi) = 2^j (xi - omega_n), index 3 j + n."""
    if levels < 1:
        raise EwtValidationError(f"levels must be at least 1, got {levels}")
    if grid.ndim != 2 or kernel.ndim != 2:
        raise EwtValidationError("the dyadic bank is two-dimensional")
    filters = []
    for j in range(levels):
        for n, center in enumerate(dyadic_centers(omega0)):
            gamma = AffineMap(2.0**j * np.eye(2), center)
            filters.append(build_filter(kernel, gamma, grid, 3 * j + n))
    return FilterBank(filters, kind="plain", kernel=kernel, grid=grid, mapper="dyadic")
