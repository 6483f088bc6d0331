"""Forward transform, dual banks, reconstruction and frame diagnostics."""

from __future__ import annotations

import itertools
from typing import Dict, List, Mapping, Optional, Tuple, Union

import attrs
import numpy as np

from ewt_filterbank import FilterBank
from ewt_log import log_to_output, log_warning
from ewt_spectral import ComplexField, RealImage, dft2, idft2
from ewt_utils import EwtNumericalError, EwtValidationError

DUAL_FLOOR = 1e-12
TIGHT_TOLERANCE = 1e-9
SHIFT_RADIUS = 3

Steps = Union[float, Mapping[int, float]]


@attrs.define(frozen=True, eq=False)
class CoefficientSet:
    """E_n(b) on the full integer grid (b_n = 1), one complex field per filter."""

    indices: Tuple[int, ...] = attrs.field(converter=tuple)
    bands: Tuple[np.ndarray, ...] = attrs.field(converter=tuple)
    lineage: str
    kind: str = "plain"
    steps: Tuple[float, ...] = ()

    def __getitem__(self, index: int) -> np.ndarray:
        try:
            return self.bands[self.indices.index(index)]
        except ValueError as exc:
            raise EwtValidationError(f"no coefficients for index {index}") from exc

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.bands[0].shape

    def manifest(self) -> dict:
        return {"indices": list(self.indices), "lineage": self.lineage, "kind": self.kind, "steps": list(self.steps)}


@attrs.define(frozen=True, eq=False)
class DualFilterBank:
    indices: Tuple[int, ...] = attrs.field(converter=tuple)
    duals: Tuple[np.ndarray, ...] = attrs.field(converter=tuple)
    lineage: str
    eps: float
    floor: float
    zero_coverage: np.ndarray

    @property
    def zero_coverage_fraction(self) -> float:
        return float(np.mean(self.zero_coverage))


@attrs.define(frozen=True)
class ShiftResidual:
    alpha: Tuple[float, ...]
    residual: float


@attrs.define(frozen=True)
class ParsevalTable:
    rows: Tuple[ShiftResidual, ...]
    approximate: bool = False

    @property
    def max_residual(self) -> float:
        return max(row.residual for row in self.rows)

    def residual_at(self, alpha) -> float:
        alpha = tuple(float(a) for a in alpha)
        for row in self.rows:
            if np.allclose(row.alpha, alpha):
                return row.residual
        raise EwtValidationError(f"shift {alpha} was not checked")


@attrs.define(frozen=True)
class DiscreteBounds:
    A: float  # pylint: disable=invalid-name
    B: float  # pylint: disable=invalid-name
    tail: float
    shift_radius: int

    @property
    def frame(self) -> bool:
        return self.A > 0


@attrs.define(frozen=True)
class FrameReport:
    A: float  # pylint: disable=invalid-name
    B: float  # pylint: disable=invalid-name
    tight: bool
    tolerance: float = TIGHT_TOLERANCE
    cross_term: Optional[float] = None
    parseval: Optional[ParsevalTable] = None
    discrete: Optional[DiscreteBounds] = None

    def document(self) -> dict:
        doc = {"A": self.A, "B": self.B, "tight": self.tight, "parseval_residuals": [], "discrete_bounds": None}
        if self.cross_term is not None:
            doc["cross_term"] = self.cross_term
        if self.parseval is not None:
            doc["parseval_residuals"] = [
                {"alpha": list(row.alpha), "residual": row.residual} for row in self.parseval.rows
            ]
            doc["parseval_approximate"] = self.parseval.approximate
        if self.discrete is not None:
            doc["discrete_bounds"] = {"A": self.discrete.A, "B": self.discrete.B, "tail": self.discrete.tail}
        return doc


def forward(f: RealImage, bank: FilterBank) -> CoefficientSet:
    """E_n = idft2(f_hat * conj(filter_n)), i.e. <f, T_b psi_n> for every integer b."""
    if tuple(f.shape) != bank.grid.shape:
        raise EwtValidationError(f"image {f.shape} does not match bank grid {bank.grid.shape}")
    spectrum = dft2(f).data
    bands = [idft2(ComplexField(spectrum * np.conj(item.values))).data for item in bank.filters]
    return CoefficientSet(
        indices=bank.indices, bands=bands, lineage=bank.lineage, kind=bank.kind, steps=(1.0,) * len(bands)
    )


def dual_bank(bank: FilterBank, eps: float = DUAL_FLOOR) -> DualFilterBank:
    """filter_n / max(D, eps * max D), with the floored samples reported."""
    if eps < 0:
        raise EwtValidationError(f"dual floor must be non-negative, got {eps}")
    denominator = bank.denominator
    peak = float(denominator.max())
    if not peak > 0:
        raise EwtNumericalError("filter bank has no energy (D is identically zero)")
    floor = eps * peak
    zero_coverage = denominator <= floor
    divisor = np.maximum(denominator, floor)
    duals = []
    for item in bank.filters:
        out = np.zeros(item.values.shape, dtype=np.complex128)
        duals.append(np.divide(item.values, divisor, out=out, where=divisor > 0))
    if np.any(zero_coverage):
        log_warning(f"dual floor active on {np.mean(zero_coverage):.3%} of the grid")
    return DualFilterBank(bank.indices, duals, bank.lineage, eps, floor, zero_coverage)


def tight_dual_bank(bank: FilterBank, report: FrameReport) -> DualFilterBank:
    """filter_n / A for a tight bank."""
    if not report.tight or not report.A > 0:
        raise EwtValidationError("the bank is not a tight frame")
    duals = [item.values / report.A for item in bank.filters]
    return DualFilterBank(bank.indices, duals, bank.lineage, 0.0, 0.0, np.zeros(bank.grid.shape, dtype=bool))


def reconstruct_with_residual(coeffs: CoefficientSet, duals: DualFilterBank) -> Tuple[RealImage, float]:
    """Real part of sum_n dft2(E_n) * dual_n, with the largest dropped imaginary part."""
    if coeffs.lineage != duals.lineage or coeffs.indices != duals.indices:
        raise EwtValidationError("coefficients and duals come from different banks")
    total = np.zeros(coeffs.shape, dtype=np.complex128)
    for band, dual in zip(coeffs.bands, duals.duals):
        total += dft2(band).data * dual
    image = idft2(ComplexField(total)).data
    return RealImage(image.real), float(np.max(np.abs(image.imag)))


def reconstruct(coeffs: CoefficientSet, duals: DualFilterBank) -> RealImage:
    image, _ = reconstruct_with_residual(coeffs, duals)
    return image


def frame_bounds(bank: FilterBank, tolerance: float = TIGHT_TOLERANCE) -> FrameReport:
    denominator = bank.denominator
    lower, upper = float(denominator.min()), float(denominator.max())
    cross = bank.cross_term
    return FrameReport(
        A=lower,
        B=upper,
        tight=(upper - lower) <= tolerance * upper and upper > 0,
        tolerance=tolerance,
        cross_term=None if cross is None else float(cross.max()),
    )


def _step_map(bank: FilterBank, steps: Steps) -> Dict[int, float]:
    if isinstance(steps, Mapping):
        missing = [n for n in bank.indices if n not in steps]
        if missing:
            raise EwtValidationError(f"no translation step for filters {missing}")
        out = {n: float(steps[n]) for n in bank.indices}
    else:
        out = {n: float(steps) for n in bank.indices}
    if any(not b > 0 for b in out.values()):
        raise EwtValidationError("translation steps must be positive")
    return out


def _lattice(ndim: int, radius: int, ring_only: bool = False) -> List[Tuple[int, ...]]:
    out = []
    for k in itertools.product(range(-radius, radius + 1), repeat=ndim):
        size = max(abs(v) for v in k)
        if (ring_only and size == radius) or (not ring_only and size > 0):
            out.append(k)
    return out


def _is_multiple(values: np.ndarray, unit: np.ndarray) -> bool:
    ratio = values / unit
    return bool(np.all(np.abs(ratio - np.round(ratio)) < 1e-9))


def _selected(bank: FilterBank, bounded_only: bool) -> List[int]:
    indices = [n for n in bank.indices if bank.is_bounded(n)] if bounded_only else list(bank.indices)
    if not indices:
        raise EwtValidationError("no filters left to check")
    return indices


def discrete_parseval_check(
    bank: FilterBank, steps: Steps = 1.0, radius: int = SHIFT_RADIUS, bounded_only: bool = False
) -> ParsevalTable:
    """max_xi |sum_{n in U_alpha} |b_n|^-N psi_n(xi) conj(psi_n(xi + alpha)) - delta(alpha)|.

    Shifts alpha run over the union of b_n^-1 Z^N with |k|_inf <= radius,
    restricted to multiples of the grid spacing.
    """
    if radius < 0:
        raise EwtValidationError(f"radius must be non-negative, got {radius}")
    approximate = not bank.kernel.compactly_supported
    if approximate:
        log_warning(f"kernel '{bank.kernel.name}' is not compactly supported; Parseval residuals are approximate")
    grid = bank.grid
    ndim = grid.ndim
    step_of = _step_map(bank, steps)
    indices = _selected(bank, bounded_only)
    coords = grid.coordinates()
    weight = {n: step_of[n] ** -ndim for n in indices}

    identity = sum(weight[n] * np.abs(bank[n].values) ** 2 for n in indices)
    rows = [ShiftResidual((0.0,) * ndim, float(np.max(np.abs(identity - 1.0))))]

    shifts: Dict[Tuple[float, ...], List[int]] = {}
    for n in indices:
        for k in _lattice(ndim, radius):
            alpha = tuple(float(v) for v in np.asarray(k, dtype=np.float64) / step_of[n])
            if _is_multiple(np.asarray(alpha), grid.spacing):
                shifts.setdefault(alpha, []).append(n)
    for alpha in sorted(shifts):
        total = np.zeros(grid.shape, dtype=np.complex128)
        for n in shifts[alpha]:
            shifted = bank.evaluate(n, coords + np.asarray(alpha))
            total += weight[n] * bank[n].values * np.conj(shifted)
        rows.append(ShiftResidual(alpha, float(np.max(np.abs(total)))))
    log_to_output(f"parseval check over {len(rows)} shifts, max residual {max(r.residual for r in rows):.3e}")
    return ParsevalTable(tuple(rows), approximate)


def _cross_sum(bank: FilterBank, indices, step_of, weight, lattice) -> np.ndarray:
    grid = bank.grid
    coords = grid.coordinates()
    total = np.zeros(grid.shape)
    for n in indices:
        magnitude = np.abs(bank[n].values)
        for k in lattice:
            shift = np.asarray(k, dtype=np.float64) / step_of[n]
            total += weight[n] * magnitude * np.abs(bank.evaluate(n, coords - shift))
    return total


def discrete_frame_bounds(
    bank: FilterBank, steps: Steps = 1.0, shift_radius: int = SHIFT_RADIUS, bounded_only: bool = False
) -> DiscreteBounds:
    """Frame bounds of {T_{b_n k} psi_n} from the truncated k-sum; tail from the next ring, doubled."""
    if shift_radius < 1:
        raise EwtValidationError(f"shift_radius must be at least 1, got {shift_radius}")
    ndim = bank.grid.ndim
    step_of = _step_map(bank, steps)
    indices = _selected(bank, bounded_only)
    weight = {n: step_of[n] ** -ndim for n in indices}

    main = sum(weight[n] * np.abs(bank[n].values) ** 2 for n in indices)
    cross = _cross_sum(bank, indices, step_of, weight, _lattice(ndim, shift_radius))
    ring = _cross_sum(bank, indices, step_of, weight, _lattice(ndim, shift_radius + 1, ring_only=True))
    tail = 2.0 * float(ring.max())
    bounds = DiscreteBounds(
        A=float(np.min(main - cross)), B=float(np.max(main + cross)), tail=tail, shift_radius=shift_radius
    )
    log_to_output(f"discrete frame bounds A={bounds.A:.4g} B={bounds.B:.4g} (tail {tail:.2e})")
    return bounds


def wavelet_spectrum(coeffs: CoefficientSet, n: int) -> RealImage:
    """|E_n(b)|^2."""
    return RealImage(np.abs(coeffs[n]) ** 2)
