"""
Utility functions for use with tests: synthetic corpora and hand-built banks.
"""
import numpy as np

from ewt_filterbank import build_plain_bank
from ewt_kernels import get_kernel
from ewt_mapping import translation_map
from ewt_partition import RegionMask
from ewt_spectral import FrequencyGrid, RealImage

# quadrant label -> center of the translation onto [-1/2, 1/2)^2
QUADRANT_CENTERS = {
    1: (0.5, 0.5),
    -1: (-0.5, -0.5),
    2: (-0.5, 0.5),
    -2: (0.5, -0.5),
}


def random_image(shape, seed: int = 0) -> RealImage:
    """White Gaussian noise image."""
    return RealImage(np.random.default_rng(seed).standard_normal(shape))


def quadrant_maps():
    return {n: translation_map(center) for n, center in QUADRANT_CENTERS.items()}


def quadrant_labels(shape) -> np.ndarray:
    """Quadrant label of every sample: Q(+,+)=1, Q(-,-)=-1, Q(-,+)=2, Q(+,-)=-2."""
    xi = FrequencyGrid(shape).coordinates()
    right = xi[..., 0] >= 0
    top = xi[..., 1] >= 0
    labels = np.where(right & top, 1, 0)
    labels = np.where(~right & ~top, -1, labels)
    labels = np.where(~right & top, 2, labels)
    return np.where(right & ~top, -2, labels)


def quadrant_bank(shape=(32, 32)):
    """Shannon bank whose filters tile the grid by quadrants; D is identically 1."""
    kernel = get_kernel("shannon")
    return build_plain_bank(kernel, quadrant_maps(), FrequencyGrid(shape), mapper="translation")


def disk_mask(shape, center, radius: float) -> np.ndarray:
    """Samples with |xi - center| < radius."""
    xi = FrequencyGrid(shape).coordinates()
    return np.sum((xi - np.asarray(center)) ** 2, axis=-1) < radius**2


def ellipse_mask(shape, center, axes, angle: float = 0.0) -> np.ndarray:
    """Rotated ellipse with semi-axes `axes` (xi units) about `center`."""
    d = FrequencyGrid(shape).coordinates() - np.asarray(center)
    c, s = np.cos(angle), np.sin(angle)
    along = c * d[..., 0] + s * d[..., 1]
    across = -s * d[..., 0] + c * d[..., 1]
    return (along / axes[0]) ** 2 + (across / axes[1]) ** 2 < 1.0


def polygon_mask(shape, vertices) -> np.ndarray:
    """Convex polygon given counter-clockwise in xi coordinates."""
    xi = FrequencyGrid(shape).coordinates()
    inside = np.ones(shape, dtype=bool)
    vertices = np.asarray(vertices, dtype=np.float64)
    for a, b in zip(vertices, np.roll(vertices, -1, axis=0)):
        edge = b - a
        rel = xi - a
        inside &= edge[0] * rel[..., 1] - edge[1] * rel[..., 0] > 0
    return inside


def region_from_mask(mask: np.ndarray, index: int = 1) -> RegionMask:
    """RegionMask with the same bookkeeping as region_masks."""
    grid = FrequencyGrid(mask.shape)
    coords = grid.coordinates()
    return RegionMask(
        index=index,
        mask=mask,
        bounded=not bool(np.any(mask & grid.border_mask())),
        centroid=tuple(float(c) for c in coords[mask].mean(axis=0)),
        count=int(mask.sum()),
    )
