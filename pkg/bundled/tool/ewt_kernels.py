"""Wavelet kernels evaluated in canonical support coordinates u."""

from __future__ import annotations

from typing import Callable, Dict, Optional

import attrs
import numpy as np

from ewt_log import log_to_output
from ewt_utils import EwtValidationError

# exp(-pi * (5/2)^2 * |u|^2)
GABOR_RATE = np.pi * 2.5**2
COVERAGE_TOLERANCE = 1e-3

KernelFunction = Callable[[np.ndarray], np.ndarray]


@attrs.define(frozen=True)
class KernelSupport:
    """Descriptor of the canonical support: an open disk or a centered square."""

    shape: str = attrs.field(validator=attrs.validators.in_(["disk", "square"]))
    size: float = attrs.field(converter=float)

    @size.validator
    def _positive(self, _attribute, value):
        if not value > 0:
            raise EwtValidationError(f"support size must be positive, got {value}")

    @property
    def half_extent(self) -> float:
        return self.size

    def contains(self, u: np.ndarray) -> np.ndarray:
        """Membership per point of an (..., N) array; squares are half-open."""
        u = np.asarray(u, dtype=np.float64)
        if self.shape == "disk":
            return np.sum(u * u, axis=-1) < self.size**2
        return np.all((u >= -self.size) & (u < self.size), axis=-1)

    def radius_at(self, theta: np.ndarray) -> np.ndarray:
        """Boundary distance from the origin along direction theta (2D)."""
        theta = np.asarray(theta, dtype=np.float64)
        if self.shape == "disk":
            return np.full_like(theta, self.size)
        return self.size / np.maximum(np.abs(np.cos(theta)), np.abs(np.sin(theta)))


@attrs.define(frozen=True, eq=False)
class WaveletKernel:
    """A kernel psi_hat(u) together with its support descriptor."""

    name: str
    evaluator: KernelFunction
    support: KernelSupport
    compactly_supported: bool
    ndim: int = 2
    delta: float = 0.0
    spatial: Optional[KernelFunction] = None
    even: bool = False

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return self.evaluator(np.asarray(u, dtype=np.float64))

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self(np.zeros((1, self.ndim))))))


def gabor1d_hat(v):
    v = np.asarray(v, dtype=np.float64)
    return np.exp(-GABOR_RATE * v * v)


def shannon1d_hat(v):
    v = np.asarray(v, dtype=np.float64)
    inside = (v >= -0.5) & (v < 0.5)
    return np.where(inside, np.exp(-1j * np.pi * (v + 1.5)), 0.0 + 0.0j)


def gabor_hat(u):
    u = np.asarray(u, dtype=np.float64)
    return np.exp(-GABOR_RATE * np.sum(u * u, axis=-1))


def shannon_hat(u):
    u = np.asarray(u, dtype=np.float64)
    out = np.ones(u.shape[:-1], dtype=np.complex128)
    for k in range(u.shape[-1]):
        out = out * shannon1d_hat(u[..., k])
    return out


def gabor_spatial(y):
    """Inverse Fourier transform of gabor_hat in any dimension."""
    y = np.asarray(y, dtype=np.float64)
    ndim = y.shape[-1]
    return (1.0 / 2.5**2) ** (ndim / 2) * np.exp(-np.pi * np.sum(y * y, axis=-1) / 2.5**2) + 0j


def shannon_spatial(y):
    """Inverse Fourier transform of shannon_hat: a phase-shifted sinc per axis."""
    y = np.asarray(y, dtype=np.float64)
    out = np.ones(y.shape[:-1], dtype=np.complex128)
    for k in range(y.shape[-1]):
        out = out * (1j * np.sinc(y[..., k] - 0.5))
    return out


def make_gabor_kernel(ndim: int = 2, radius: float = 0.5) -> WaveletKernel:
    return WaveletKernel(
        name="gabor",
        evaluator=gabor_hat,
        support=KernelSupport("disk", radius),
        compactly_supported=False,
        ndim=ndim,
        spatial=gabor_spatial,
        even=True,
    )


def make_shannon_kernel(ndim: int = 2) -> WaveletKernel:
    return WaveletKernel(
        name="shannon",
        evaluator=shannon_hat,
        support=KernelSupport("square", 0.5),
        compactly_supported=True,
        ndim=ndim,
        spatial=shannon_spatial,
    )


def kernel_coverage(kernel: WaveletKernel, resolution: int = 512) -> float:
    """Riemann-sum estimate of the mass fraction of |psi_hat|^2 outside the support."""
    if resolution < 64:
        raise EwtValidationError(f"coverage resolution must be at least 64, got {resolution}")
    half = kernel.support.half_extent
    step = 2.0 * half / resolution
    # non-compact kernels get a box wide enough for their tails
    bound = 2.0 * half if kernel.compactly_supported else 4.0 * half
    centers = -bound + (np.arange(int(round(2 * bound / step))) + 0.5) * step
    mesh = np.meshgrid(*([centers] * kernel.ndim), indexing="ij")
    u = np.stack(mesh, axis=-1)
    power = np.abs(kernel(u)) ** 2
    total = power.sum()
    if total == 0:
        raise EwtValidationError(f"kernel '{kernel.name}' has no energy")
    outside = power[~kernel.support.contains(u)].sum()
    return float(outside / total)


KERNELS: Dict[str, Callable[..., WaveletKernel]] = {
    "gabor": make_gabor_kernel,
    "shannon": make_shannon_kernel,
}


def register_kernel(name: str, factory: Callable[..., WaveletKernel]) -> None:
    """Add a kernel factory after checking the coverage contract."""
    kernel = factory()
    delta = kernel_coverage(kernel, resolution=128)
    if delta >= 1.0 - COVERAGE_TOLERANCE:
        raise EwtValidationError(f"kernel '{name}' is not mostly supported by its support (delta={delta})")
    KERNELS[name] = factory


def get_kernel(name: str, ndim: int = 2, resolution: int = 256) -> WaveletKernel:
    """Build a registered kernel with its coverage deficit filled in."""
    if name not in KERNELS:
        raise EwtValidationError(f"unknown kernel '{name}', expected one of {sorted(KERNELS)}")
    kernel = KERNELS[name](ndim=ndim)
    delta = kernel_coverage(kernel, resolution=resolution)
    if delta >= 1.0 - COVERAGE_TOLERANCE:
        raise EwtValidationError(f"kernel '{name}' violates the coverage contract (delta={delta})")
    log_to_output(f"kernel {name}: coverage deficit {delta:.3e}")
    return attrs.evolve(kernel, delta=delta)


def spatial_kernel(kernel: WaveletKernel) -> KernelFunction:
    """Closed-form inverse transform of the kernel."""
    if kernel.spatial is None:
        raise EwtValidationError(f"kernel '{kernel.name}' has no closed-form spatial profile")
    return kernel.spatial
