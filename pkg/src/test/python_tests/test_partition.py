"""
Tests for Voronoi, watershed and interval partitions and their validation.
"""

import numpy as np
import pytest
from hamcrest import assert_that, equal_to, greater_than, has_length, is_

from ewt_io import read_partition, write_partition
from ewt_log import captured_warnings
from ewt_modes import Mode, ModeSet
from ewt_partition import (
    PartitionLabelMap,
    interval_partition,
    region_masks,
    validate_partition,
    voronoi_partition,
    watershed_partition,
)
from ewt_spectral import FrequencyGrid, RealImage
from ewt_utils import EwtValidationError

SHAPE = (32, 32)


def _modes(*xis, shape=SHAPE):
    return ModeSet([Mode(xi) for xi in xis], shape, symmetric=True)


def _three_seeds():
    return _modes((0.0, 0.0), (0.25, 0.0), (-0.25, 0.0))


def test_voronoi_labels_and_order():
    partition = voronoi_partition(_three_seeds())
    grid = FrequencyGrid(SHAPE)
    assert_that(partition.label_order(), equal_to([0, 1, -1]))
    assert_that(int(partition.labels[grid.index_of((0.25, 0.0))]), equal_to(1))
    assert_that(int(partition.labels[grid.index_of((-0.25, 0.1))]), equal_to(-1))
    # equidistant samples go to the smaller |label|
    assert_that(int(partition.labels[grid.index_of((0.125, 0.0))]), equal_to(0))
    assert_that(validate_partition(partition).valid, is_(True))


def test_voronoi_is_a_disjoint_symmetric_cover():
    modes = _modes((0.0, 0.0), (0.1875, 0.125), (-0.1875, -0.125), (0.0625, 0.3125), (-0.0625, -0.3125))
    partition = voronoi_partition(modes)
    report = validate_partition(partition)
    assert_that((report.covering, report.connected, report.symmetric), equal_to((True, True, True)))
    regions = region_masks(partition)
    assert_that(sum(r.count for r in regions), equal_to(SHAPE[0] * SHAPE[1]))
    total = np.sum([r.mask.astype(int) for r in regions], axis=0)
    assert_that(bool(np.all(total == 1)), is_(True))


def test_watershed_on_flat_spectrum_matches_voronoi():
    """With a constant surface the flood order reduces to nearest-seed distance."""
    modes = _three_seeds()
    flat = RealImage(np.ones(SHAPE))
    watershed = watershed_partition(flat, modes, smoothing_sigma=0.0)
    voronoi = voronoi_partition(modes)
    off_nyquist = ~FrequencyGrid(SHAPE).nyquist_mask()
    assert_that(bool(np.array_equal(watershed.labels[off_nyquist], voronoi.labels[off_nyquist])), is_(True))
    assert_that(validate_partition(watershed).valid, is_(True))
    assert_that(watershed.method, equal_to("watershed"))


def test_watershed_follows_spectral_valleys():
    """A ridge between two seeds shifts the boundary onto the valley."""
    grid = FrequencyGrid(SHAPE)
    xi = grid.coordinates()
    surface = np.exp(-np.sum((xi - (0.25, 0.0)) ** 2, axis=-1) / 0.01)
    surface += np.exp(-np.sum((xi + (0.25, 0.0)) ** 2, axis=-1) / 0.01)
    surface += np.exp(-np.sum(xi**2, axis=-1) / 0.002)
    partition = watershed_partition(RealImage(surface), _three_seeds(), smoothing_sigma=1.0)
    report = validate_partition(partition)
    assert_that(report.valid, is_(True))
    # Voronoi gives this equidistant sample to DC; the flood reaches it from the broad lobe first
    assert_that(int(partition.labels[grid.index_of((0.125, 0.0))]), equal_to(1))
    assert_that(partition.warnings, has_length(0))


def test_watershed_warns_on_seed_off_maximum():
    grid = FrequencyGrid(SHAPE)
    xi = grid.coordinates()
    surface = np.exp(-np.sum((xi - (0.3125, 0.0)) ** 2, axis=-1) / 0.002)
    surface += grid.mirror(surface)
    with captured_warnings() as warnings:
        partition = watershed_partition(RealImage(surface), _three_seeds())
    assert_that(len(partition.warnings), greater_than(0))
    assert_that(warnings, equal_to(list(partition.warnings)))


def test_partitions_need_dc_and_mirrors():
    with pytest.raises(EwtValidationError):
        voronoi_partition(_modes((0.25, 0.0), (-0.25, 0.0)))
    with pytest.raises(EwtValidationError):
        voronoi_partition(_modes((0.0, 0.0), (0.25, 0.0)))


def test_validation_finds_disconnected_and_asymmetric_labels():
    labels = voronoi_partition(_three_seeds()).labels.copy()
    labels[16, 30] = -1
    report = validate_partition(PartitionLabelMap(labels))
    assert_that(report.connected, is_(False))
    assert_that(report.symmetric, is_(False))
    assert_that((16, 30) in report.disconnected, is_(True))
    with pytest.raises(EwtValidationError):
        region_masks(PartitionLabelMap(labels))


def test_region_masks_report_boundedness():
    regions = {r.index: r for r in region_masks(voronoi_partition(_three_seeds()))}
    assert_that(regions[0].bounded, is_(False))
    assert_that(regions[0].centroid, equal_to((0.0, -1 / 64)))
    # Nyquist column -1/2 belongs to region -1
    assert_that((regions[0].count, regions[1].count, regions[-1].count), equal_to((9 * 32, 11 * 32, 12 * 32)))


def test_boundary_mask_marks_both_sides():
    labels = np.zeros((4, 4), dtype=np.int64)
    labels[:, 2:] = 1
    mask = PartitionLabelMap(labels, symmetric=False).boundary_mask
    assert_that(np.argwhere(mask)[:, 1].tolist(), equal_to([1, 2] * 4))


def test_interval_partition():
    """|xi| < 0.1 is region 0, 0.1 <= xi < 0.3 region 1, the rest region 2, mirrored."""
    grid = FrequencyGrid((64,))
    partition = interval_partition([0.3, 0.1], grid)
    labels = {grid.xi_of((i,))[0]: int(v) for i, v in enumerate(partition.labels)}
    assert_that(labels[0.0], equal_to(0))
    assert_that(labels[0.203125], equal_to(1))
    assert_that(labels[-0.203125], equal_to(-1))
    assert_that(labels[0.34375], equal_to(2))
    assert_that(labels[-0.5], equal_to(-2))
    assert_that(validate_partition(partition).valid, is_(True))


@pytest.mark.parametrize("boundaries", [[], [0.0, 0.2], [0.2, 0.5]])
def test_interval_partition_rejects_bad_boundaries(boundaries):
    with pytest.raises(EwtValidationError):
        interval_partition(boundaries, FrequencyGrid((64,)))


def test_partition_artifacts_survive_disk(tmp_path):
    partition = voronoi_partition(_three_seeds())
    write_partition(tmp_path, partition)
    loaded = read_partition(tmp_path)
    assert_that(bool(np.array_equal(loaded.labels, partition.labels)), is_(True))
    assert_that(loaded.seeds, equal_to(partition.seeds))
    assert_that((tmp_path / "labels.ewt").is_file(), is_(True))
