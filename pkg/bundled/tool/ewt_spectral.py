"""Real/complex field types, centered DFT conventions, energies and errors.

Frequency samples live on a centered grid: along an axis of length n the
sample with array index i sits at (i - n // 2) / n cycles/sample, so zero is
always a sample and the Nyquist line (even n) is on the negative side. The
frequency vector is ordered (xi_1, xi_2, ...) with xi_1 running along the
last array axis (image width) and xi_2 along the rows.
"""

from __future__ import annotations

from typing import Tuple, Union

import attrs
import numpy as np
from scipy import fft

from ewt_utils import EwtValidationError


def _check_shape(_instance, _attribute, value: np.ndarray) -> None:
    if value.ndim not in (1, 2):
        raise EwtValidationError(f"fields must be 1D or 2D, got {value.ndim}D")
    if min(value.shape) < 2:
        raise EwtValidationError(f"every dimension must be at least 2, got {value.shape}")


def _check_finite(_instance, _attribute, value: np.ndarray) -> None:
    if not np.all(np.isfinite(value)):
        raise EwtValidationError("field contains non-finite values")


@attrs.define(frozen=True, eq=False)
class RealImage:
    """Real samples on a (spatial or frequency) grid, row-major."""

    data: np.ndarray = attrs.field(
        converter=lambda v: np.asarray(v, dtype=np.float64),
        validator=[_check_shape, _check_finite],
    )

    @property
    def width(self) -> int:
        return self.data.shape[-1]

    @property
    def height(self) -> int:
        return self.data.shape[0] if self.data.ndim == 2 else 1

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape


@attrs.define(frozen=True, eq=False)
class ComplexField:
    """Complex samples; `centered` marks the frequency layout of dft2."""

    data: np.ndarray = attrs.field(
        converter=lambda v: np.asarray(v, dtype=np.complex128),
        validator=[_check_shape, _check_finite],
    )
    centered: bool = True

    @property
    def width(self) -> int:
        return self.data.shape[-1]

    @property
    def height(self) -> int:
        return self.data.shape[0] if self.data.ndim == 2 else 1

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape


@attrs.define(frozen=True)
class FrequencyGrid:
    """Index <-> xi bookkeeping for a centered grid of the given array shape."""

    shape: Tuple[int, ...] = attrs.field(converter=tuple)

    @shape.validator
    def _check(self, _attribute, value):
        if len(value) not in (1, 2) or min(value) < 2:
            raise EwtValidationError(f"unsupported grid shape {value}")

    @classmethod
    def like(cls, value: Union[RealImage, ComplexField, np.ndarray]) -> "FrequencyGrid":
        return cls(np.shape(getattr(value, "data", value)))

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def width(self) -> int:
        return self.shape[-1]

    @property
    def height(self) -> int:
        return self.shape[0] if self.ndim == 2 else 1

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def center(self) -> Tuple[int, ...]:
        """Array index of xi = 0."""
        return tuple(n // 2 for n in self.shape)

    @property
    def spacing(self) -> np.ndarray:
        """Sample spacing per xi component (xi_1 first)."""
        return np.array([1.0 / n for n in reversed(self.shape)])

    def axis_frequencies(self, axis: int) -> np.ndarray:
        n = self.shape[axis]
        return (np.arange(n) - n // 2) / n

    def coordinates(self) -> np.ndarray:
        """Array of shape (*shape, N) with xi per sample, xi_1 on the last axis."""
        axes = [self.axis_frequencies(a) for a in range(self.ndim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack(mesh[::-1], axis=-1)

    def spatial_coordinates(self) -> np.ndarray:
        """Periodic spatial sample positions (0, 1, ..., -1), same layout as coordinates."""
        axes = [np.fft.fftfreq(n) * n for n in self.shape]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack(mesh[::-1], axis=-1)

    def xi_of(self, index: Tuple[int, ...]) -> Tuple[float, ...]:
        return tuple(
            float((index[a] - self.shape[a] // 2) / self.shape[a])
            for a in reversed(range(self.ndim))
        )

    def index_of(self, xi: Tuple[float, ...]) -> Tuple[int, ...]:
        """Nearest array index of a frequency vector (raises off-grid)."""
        index = []
        for a in range(self.ndim):
            n = self.shape[a]
            i = int(np.floor(xi[self.ndim - 1 - a] * n + 0.5)) + n // 2
            if not 0 <= i < n:
                raise EwtValidationError(f"frequency {xi} is outside the grid")
            index.append(i)
        return tuple(index)

    def mirror_index(self, axis: int) -> np.ndarray:
        """Index map i -> index of -xi along `axis` (Nyquist maps to itself)."""
        n = self.shape[axis]
        return (2 * (n // 2) - np.arange(n)) % n

    def mirror(self, values: np.ndarray) -> np.ndarray:
        """values(-xi) for an array laid out on this grid (extra trailing axes kept)."""
        out = values
        for a in range(self.ndim):
            out = np.take(out, self.mirror_index(a), axis=a)
        return out

    def nyquist_mask(self) -> np.ndarray:
        """Samples on a Nyquist line; they have no exact mirror sample."""
        mask = np.zeros(self.shape, dtype=bool)
        for a, n in enumerate(self.shape):
            if n % 2 == 0:
                sl = [slice(None)] * self.ndim
                sl[a] = 0
                mask[tuple(sl)] = True
        return mask

    def border_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for a in range(self.ndim):
            for edge in (0, -1):
                sl = [slice(None)] * self.ndim
                sl[a] = edge
                mask[tuple(sl)] = True
        return mask


def dft2(img: RealImage) -> ComplexField:
    """Centered, unnormalized forward DFT."""
    data = img.data if isinstance(img, RealImage) else np.asarray(img)
    if not np.all(np.isfinite(data)):
        raise EwtValidationError("cannot transform an image with non-finite values")
    return ComplexField(fft.fftshift(fft.fftn(data)))


def idft2(field: ComplexField) -> ComplexField:
    """Inverse of dft2 carrying the 1/(W*H) factor; output is in spatial layout."""
    data = field.data if isinstance(field, ComplexField) else np.asarray(field)
    if not np.all(np.isfinite(data)):
        raise EwtValidationError("cannot invert a field with non-finite values")
    return ComplexField(fft.ifftn(fft.ifftshift(data)), centered=False)


def log_magnitude(field: ComplexField) -> RealImage:
    return RealImage(np.log1p(np.abs(field.data)))


def _mask_array(mask) -> np.ndarray:
    return np.asarray(getattr(mask, "mask", mask), dtype=bool)


def band_energy(field: ComplexField, mask) -> float:
    """(1/(W*H)) * sum of |field|^2 over the mask (a RegionMask or boolean array)."""
    mask = _mask_array(mask)
    if mask.shape != field.shape:
        raise EwtValidationError(f"mask shape {mask.shape} does not match field {field.shape}")
    power = np.abs(field.data[mask]) ** 2
    return float(power.sum() / field.data.size)


def total_energy(field: ComplexField) -> float:
    return float((np.abs(field.data) ** 2).sum() / field.data.size)


def mse(a: RealImage, b: RealImage) -> float:
    if a.shape != b.shape:
        raise EwtValidationError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.mean(np.abs(a.data - b.data) ** 2))
