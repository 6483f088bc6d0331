"""Symmetric Voronoi and watershed partitions of the frequency grid.

Labels are signed integers: 0 is the region holding xi = 0, n > 0 the
region seeded by the n-th canonical-half mode (strongest first) and -n its
mirror.
"""

from __future__ import annotations

import heapq
import itertools
from typing import Dict, List, Optional, Tuple

import attrs
import numpy as np
from scipy import ndimage

from ewt_log import log_to_output, log_warning
from ewt_modes import ModeSet, _is_upper, _mirror
from ewt_spectral import FrequencyGrid, RealImage
from ewt_utils import EwtValidationError

UNLABELED = np.iinfo(np.int64).min
WATERSHED_SIGMA = 2.0


@attrs.define(frozen=True, eq=False)
class PartitionLabelMap:
    labels: np.ndarray
    symmetric: bool = True
    seeds: Dict[int, Tuple[float, ...]] = attrs.field(factory=dict)
    method: str = "voronoi"
    warnings: Tuple[str, ...] = ()

    @property
    def grid(self) -> FrequencyGrid:
        return FrequencyGrid(self.labels.shape)

    @property
    def width(self) -> int:
        return self.labels.shape[-1]

    @property
    def height(self) -> int:
        return self.labels.shape[0] if self.labels.ndim == 2 else 1

    @property
    def boundary_mask(self) -> np.ndarray:
        """Samples with a 4-neighbor (no wrap) carrying another label."""
        labels = self.labels
        mask = np.zeros(labels.shape, dtype=bool)
        for axis in range(labels.ndim):
            lead = [slice(None)] * labels.ndim
            trail = [slice(None)] * labels.ndim
            lead[axis] = slice(1, None)
            trail[axis] = slice(None, -1)
            differ = labels[tuple(lead)] != labels[tuple(trail)]
            mask[tuple(lead)] |= differ
            mask[tuple(trail)] |= differ
        return mask

    def label_order(self) -> List[int]:
        """0, 1, -1, 2, -2, ... restricted to labels present."""
        present = {int(v) for v in np.unique(self.labels) if v != UNLABELED}
        return sorted(present, key=lambda n: (abs(n), n < 0))


@attrs.define(frozen=True, eq=False)
class RegionMask:
    index: int
    mask: np.ndarray
    bounded: bool
    centroid: Tuple[float, ...]
    count: int


@attrs.define(frozen=True)
class ValidationReport:
    covering: bool
    connected: bool
    symmetric: bool
    unlabeled: Tuple[Tuple[int, ...], ...] = ()
    disconnected: Tuple[Tuple[int, ...], ...] = ()
    asymmetric: Tuple[Tuple[int, ...], ...] = ()

    @property
    def valid(self) -> bool:
        return self.covering and self.connected and self.symmetric


def _seed_labels(modes: ModeSet) -> List[Tuple[int, Tuple[int, ...]]]:
    """(label, index) pairs: DC -> 0, canonical modes -> 1.., mirrors -> negative."""
    grid = modes.grid
    indices = modes.indices()
    if len(set(indices)) != len(indices):
        raise EwtValidationError("duplicate mode seeds")
    if not modes.contains_dc:
        raise EwtValidationError("partitions need the DC mode")
    present = set(indices)
    seeds = [(0, grid.center)]
    n = 0
    for index in indices:
        if index == grid.center or not _is_upper(index, grid):
            continue
        mirror = _mirror(index, grid)
        if mirror not in present:
            raise EwtValidationError(f"mode {grid.xi_of(index)} has no mirror; symmetrize the modes first")
        n += 1
        seeds.append((n, index))
        seeds.append((-n, mirror))
    if len(seeds) != len(indices):
        raise EwtValidationError("mode set is not symmetric")
    return seeds


def _priority(label: int) -> Tuple[int, int]:
    return (abs(label), 1 if label < 0 else 0)


def voronoi_partition(modes: ModeSet, grid: Optional[FrequencyGrid] = None) -> PartitionLabelMap:
    """Nearest-seed labeling in Euclidean xi distance."""
    grid = grid or modes.grid
    if grid.shape != tuple(modes.shape):
        raise EwtValidationError(f"modes live on {modes.shape}, grid is {grid.shape}")
    seeds = sorted(_seed_labels(modes), key=lambda item: _priority(item[0]))
    coords = grid.coordinates()
    distances = np.stack(
        [np.sum((coords - np.asarray(grid.xi_of(index))) ** 2, axis=-1) for _, index in seeds]
    )
    # argmin keeps the first minimum: ties go to the smaller |label|, + before -
    winner = np.argmin(distances, axis=0)
    labels = np.asarray([label for label, _ in seeds], dtype=np.int64)[winner]
    log_to_output(f"voronoi partition with {len(seeds)} regions")
    return PartitionLabelMap(
        labels,
        symmetric=True,
        seeds={label: grid.xi_of(index) for label, index in seeds},
        method="voronoi",
    )


def _neighbors(index: Tuple[int, ...], shape) -> List[Tuple[int, ...]]:
    out = []
    for axis in range(len(shape)):
        for step in (-1, 1):
            j = index[axis] + step
            if 0 <= j < shape[axis]:
                out.append(index[:axis] + (j,) + index[axis + 1 :])
    return out


def _fill_unlabeled(labels: np.ndarray) -> None:
    """Leftover samples (Nyquist corners) copy a labeled 4-neighbor."""
    pending = [tuple(i) for i in np.argwhere(labels == UNLABELED)]
    while pending:
        remaining = []
        for index in pending:
            found = [labels[n] for n in _neighbors(index, labels.shape) if labels[n] != UNLABELED]
            if found:
                labels[index] = found[0]
            else:
                remaining.append(index)
        if len(remaining) == len(pending):
            break
        pending = remaining


def watershed_partition(
    log_spec: RealImage, modes: ModeSet, smoothing_sigma: float = WATERSHED_SIGMA
) -> PartitionLabelMap:
    """Priority flood of the negated smoothed log spectrum from the mode seeds.

    Mirrored samples are flooded in pairs with 4-connectivity: the sample
    popped first takes the label of the front that reached it and its mirror
    the opposite label. Ties go to the smaller squared distance to the seed,
    then |label|, then sign. Nyquist samples are labeled but never spread.
    """
    if smoothing_sigma < 0:
        raise EwtValidationError(f"smoothing sigma must be non-negative, got {smoothing_sigma}")
    grid = FrequencyGrid(log_spec.shape)
    if grid.shape != tuple(modes.shape):
        raise EwtValidationError(f"modes live on {modes.shape}, spectrum is {grid.shape}")
    seeds = _seed_labels(modes)

    smoothed = log_spec.data
    if smoothing_sigma > 0:
        smoothed = ndimage.gaussian_filter(smoothed, smoothing_sigma, mode="wrap")
    smoothed = 0.5 * (smoothed + grid.mirror(smoothed))
    surface = -smoothed

    warnings = []
    peaks = ndimage.maximum_filter(smoothed, size=3, mode="wrap")
    for label, index in seeds:
        if smoothed[index] < peaks[index]:
            message = f"seed {label} at {grid.xi_of(index)} is not a local maximum after smoothing"
            log_warning(message)
            warnings.append(message)

    shape = grid.shape
    nyquist = grid.nyquist_mask()
    mirrors = [grid.mirror_index(a) for a in range(grid.ndim)]
    labels = np.full(shape, UNLABELED, dtype=np.int64)
    seed_at = {label: index for label, index in seeds}
    heap = []
    counter = itertools.count()

    def distance(index, label) -> float:
        seed = seed_at[label]
        return sum(((i - s) / n) ** 2 for i, s, n in zip(index, seed, shape))

    def spread(index, label) -> None:
        if nyquist[index]:
            return
        for neighbor in _neighbors(index, shape):
            if labels[neighbor] == UNLABELED:
                key = (surface[neighbor], distance(neighbor, label), *_priority(label), next(counter))
                heapq.heappush(heap, key + (neighbor, label))

    for label, index in seeds:
        labels[index] = label
    for label, index in seeds:
        spread(index, label)

    while heap:
        *_, index, label = heapq.heappop(heap)
        if labels[index] != UNLABELED:
            continue
        labels[index] = label
        spread(index, label)
        if nyquist[index]:
            continue
        mirror = tuple(int(mirrors[a][i]) for a, i in enumerate(index))
        if mirror != index and labels[mirror] == UNLABELED:
            labels[mirror] = -label
            spread(mirror, -label)

    _fill_unlabeled(labels)
    log_to_output(f"watershed partition with {len(seeds)} regions")
    return PartitionLabelMap(
        labels,
        symmetric=True,
        seeds={label: grid.xi_of(index) for label, index in seeds},
        method="watershed",
        warnings=tuple(warnings),
    )


def interval_partition(boundaries, grid: FrequencyGrid) -> PartitionLabelMap:
    """1D symmetric partition from positive boundaries 0 < w_1 < w_2 < ... < 1/2.

    Samples with |xi| < w_1 form region 0, w_n <= xi < w_{n+1} region n and
    the mirrored interval region -n.
    """
    if grid.ndim != 1:
        raise EwtValidationError("interval partitions are one-dimensional")
    edges = np.asarray(sorted(boundaries), dtype=np.float64)
    if edges.size == 0 or edges[0] <= 0 or edges[-1] >= 0.5:
        raise EwtValidationError("boundaries must lie strictly inside (0, 1/2)")
    xi = grid.coordinates()[..., 0]
    band = np.searchsorted(edges, np.abs(xi), side="right")
    labels = (np.sign(xi) * band).astype(np.int64)
    seeds = {0: (0.0,)}
    return PartitionLabelMap(labels, symmetric=True, seeds=seeds, method="interval")


def validate_partition(p: PartitionLabelMap) -> ValidationReport:
    labels = p.labels
    grid = p.grid
    unlabeled = tuple(map(tuple, np.argwhere(labels == UNLABELED)))

    structure = ndimage.generate_binary_structure(labels.ndim, 1)
    disconnected = []
    for label in p.label_order():
        components, count = ndimage.label(labels == label, structure=structure)
        if count > 1:
            sizes = np.bincount(components.ravel())[1:]
            keep = int(np.argmax(sizes)) + 1
            stray = (components > 0) & (components != keep)
            disconnected.extend(map(tuple, np.argwhere(stray)))

    asymmetric = ()
    if p.symmetric:
        checked = ~grid.nyquist_mask()
        bad = checked & (grid.mirror(labels) != -labels)
        asymmetric = tuple(map(tuple, np.argwhere(bad)))
        if labels[grid.center] != 0:
            asymmetric = asymmetric + (grid.center,)

    return ValidationReport(
        covering=not unlabeled,
        connected=not disconnected,
        symmetric=not asymmetric,
        unlabeled=unlabeled,
        disconnected=tuple(disconnected),
        asymmetric=asymmetric,
    )


def region_masks(p: PartitionLabelMap) -> List[RegionMask]:
    """One mask per label in 0, 1, -1, 2, -2, ... order."""
    report = validate_partition(p)
    if not report.valid:
        raise EwtValidationError(
            f"invalid partition: covering={report.covering}, connected={report.connected},"
            f" symmetric={report.symmetric}"
        )
    grid = p.grid
    border = grid.border_mask()
    coords = grid.coordinates()
    regions = []
    for label in p.label_order():
        mask = p.labels == label
        regions.append(
            RegionMask(
                index=label,
                mask=mask,
                bounded=not bool(np.any(mask & border)),
                centroid=tuple(float(c) for c in coords[mask].mean(axis=0)),
                count=int(mask.sum()),
            )
        )
    return regions
