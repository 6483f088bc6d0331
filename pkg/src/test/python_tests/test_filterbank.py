"""
Tests for plain, symmetric and dyadic filter banks.
"""

import numpy as np
import pytest
from hamcrest import assert_that, close_to, equal_to, has_entries, is_, less_than_or_equal_to

from ewt_filterbank import (
    FilterBank,
    build_filter,
    build_plain_bank,
    build_symmetric_bank,
    dyadic_bank_2d,
    dyadic_centers,
    lattice_spatial_kernel,
    separable_kernel,
    spatial_filter_affine,
    spatial_symmetric_filter,
    symmetric_maps,
)
from ewt_kernels import GABOR_RATE, KernelSupport, get_kernel, shannon_hat, shannon_spatial, spatial_kernel
from ewt_mapping import AffineMap, affine_map_for_region, interval_map, mirror_map
from ewt_partition import interval_partition, region_masks
from ewt_spectral import ComplexField, FrequencyGrid, idft2
from ewt_transform import frame_bounds
from ewt_utils import EwtNumericalError, EwtValidationError

from .ewt_test_client import constants, utils

SHAPE = (32, 32)


def test_quadrant_bank_tiles_the_grid():
    bank = utils.quadrant_bank(SHAPE)
    assert_that(bank.indices, equal_to([1, -1, 2, -2]))
    assert_that(float(np.max(np.abs(bank.denominator - 1.0))), less_than_or_equal_to(1e-12))
    labels = utils.quadrant_labels(SHAPE)
    for n in bank.indices:
        support = np.abs(bank[n].values) > 0
        assert_that(bool(np.array_equal(support, labels == n)), is_(True))


def test_symmetric_bank_halves_the_denominator():
    """Disjoint mirror supports give |chi_n|^2 = (|psi_n|^2 + |psi_-n|^2) / 2."""
    bank = build_symmetric_bank(utils.quadrant_bank(SHAPE))
    assert_that(bank.kind, equal_to("symmetric"))
    assert_that(bank.indices, equal_to([1, 2]))
    assert_that(float(np.max(np.abs(bank.denominator - 0.5))), less_than_or_equal_to(1e-12))
    assert_that(float(bank.cross_term.max()), equal_to(0.0))


def test_symmetric_filters_of_real_images_are_hermitian():
    """chi_n(-xi) == conj(chi_n(xi)) when gamma_-n is the mirror map."""
    grid = FrequencyGrid(SHAPE)
    maps = symmetric_maps(
        {0: AffineMap(np.eye(2) * 4.0, [0.0, 0.0]), 1: AffineMap([[5.0, 1.0], [0.0, 4.0]], [0.2, 0.1])}
    )
    bank = build_symmetric_bank(build_plain_bank(get_kernel("gabor"), maps, grid))
    values = bank[1].values
    inside = ~grid.nyquist_mask()
    assert_that(
        float(np.max(np.abs(grid.mirror(values) - np.conj(values))[inside])), less_than_or_equal_to(1e-12)
    )


def test_symmetric_bank_needs_mirrors():
    maps = utils.quadrant_maps()
    del maps[-2]
    plain = build_plain_bank(get_kernel("shannon"), maps, FrequencyGrid(SHAPE))
    with pytest.raises(EwtValidationError):
        build_symmetric_bank(plain)


def test_empty_banks_are_rejected():
    with pytest.raises(EwtNumericalError):
        build_plain_bank(get_kernel("shannon"), {}, FrequencyGrid(SHAPE))
    with pytest.raises(EwtNumericalError):
        FilterBank([], kind="plain", kernel=get_kernel("shannon"), grid=FrequencyGrid(SHAPE))


def test_one_dimensional_interval_filter():
    """Shannon on (xi - 0.25) / 0.1 is sqrt(10) in modulus on [0.2, 0.3) and zero elsewhere."""
    grid = FrequencyGrid((64,))
    item = build_filter(get_kernel("shannon", ndim=1), interval_map(0.25, 0.1), grid, 1)
    xi = grid.coordinates()[..., 0]
    inside = (xi >= 0.2) & (xi < 0.3)
    assert_that(int(inside.sum()), equal_to(7))
    assert_that(float(np.max(np.abs(np.abs(item.values[inside]) - np.sqrt(10.0)))), less_than_or_equal_to(1e-12))
    assert_that(float(np.max(np.abs(item.values[~inside]))), equal_to(0.0))


def test_interval_regions_reduce_to_the_classical_filters():
    """Bounded intervals give |Omega|^(-1/2) psi_hat((xi - omega) / |Omega|) and its cosine-modulated pair."""
    grid = FrequencyGrid((64,))
    kernel = get_kernel("shannon", ndim=1)
    xi = grid.coordinates()
    x = grid.spatial_coordinates()
    bounded = [r for r in region_masks(interval_partition((4 / 64, 12 / 64, 24 / 64), grid)) if r.bounded]
    assert_that([r.index for r in bounded], equal_to([0, 1, -1, 2, -2]))
    for region in bounded:
        gamma = affine_map_for_region(region, kernel.support)
        width = region.count / 64
        omega = region.centroid[0]
        expected = np.sqrt(1.0 / width) * shannon_hat((xi - omega) / width)
        values = build_filter(kernel, gamma, grid, region.index).values
        assert_that(float(np.max(np.abs(values - expected))), less_than_or_equal_to(1e-12))

        chi = spatial_symmetric_filter(spatial_kernel(kernel), gamma, grid).data
        pair = np.sqrt(2.0 * width) * shannon_spatial(width * x) * np.cos(2.0 * np.pi * omega * x[..., 0])
        assert_that(float(np.max(np.abs(chi - pair))), less_than_or_equal_to(1e-10))


def test_spatial_and_fourier_constructions_agree():
    """|det A|^(-1/2) psi(A^-T x) e^(2 pi i eta.x) is the inverse DFT of the sampled filter."""
    grid = FrequencyGrid((128, 128))
    kernel = get_kernel("shannon")
    rng = np.random.default_rng(4)
    gamma = AffineMap(np.diag(rng.uniform(3.0, 6.0, 2)) + rng.uniform(-0.5, 0.5, (2, 2)), rng.uniform(-0.3, 0.3, 2))
    fourier = idft2(ComplexField(build_filter(kernel, gamma, grid, 1).values)).data
    spatial = spatial_filter_affine(lattice_spatial_kernel(kernel, gamma, grid), gamma.matrix, gamma.center, grid)
    error = np.max(np.abs(spatial.data - fourier)) / np.max(np.abs(fourier))
    assert_that(float(error), less_than_or_equal_to(constants.SPATIAL_TOLERANCE))


def test_spatial_symmetric_filter_matches_fourier_pair():
    """With 2 eta on the grid the mirrored lattice is the mirror filter's own lattice."""
    grid = FrequencyGrid((64, 64))
    kernel = get_kernel("shannon")
    gamma = AffineMap([[4.0, 0.5], [0.0, 5.0]], [0.25, 0.125])
    chi = spatial_symmetric_filter(lattice_spatial_kernel(kernel, gamma, grid), gamma, grid)
    plus = build_filter(kernel, gamma, grid, 1).values
    minus = build_filter(kernel, mirror_map(gamma), grid, -1).values
    expected = idft2(ComplexField((plus + minus) / np.sqrt(2.0))).data
    error = np.max(np.abs(chi.data - expected)) / np.max(np.abs(expected))
    assert_that(float(error), less_than_or_equal_to(constants.SPATIAL_TOLERANCE))


def test_dyadic_bank():
    bank = dyadic_bank_2d(2, 0.25, get_kernel("gabor"), FrequencyGrid(SHAPE))
    assert_that(bank.indices, equal_to(list(range(6))))
    assert_that(bank.mapper, equal_to("dyadic"))
    grid = bank.grid
    # level 1 filters carry sqrt(det 2I) = 2 at their centers
    assert_that(float(np.abs(bank[3].values[grid.index_of((0.25, 0.0))])), close_to(2.0, 1e-12))
    assert_that(float(np.abs(bank[2].values[grid.index_of((0.25, 0.25))])), close_to(1.0, 1e-12))
    with pytest.raises(EwtValidationError):
        dyadic_bank_2d(0, 0.25, get_kernel("gabor"), FrequencyGrid(SHAPE))


def test_separable_kernel():
    kernel = separable_kernel(
        lambda v: np.exp(-GABOR_RATE * v * v), "gabor", KernelSupport("square", 0.5), compactly_supported=False
    )
    u = np.array([[0.1, 0.2], [0.0, 0.0]])
    assert_that(kernel.name, equal_to("gabor-separable"))
    assert_that(bool(np.allclose(kernel(u), get_kernel("gabor")(u), rtol=0, atol=1e-15)), is_(True))


def test_evaluate_matches_stored_samples():
    bank = build_symmetric_bank(utils.quadrant_bank(SHAPE))
    coords = bank.grid.coordinates()
    assert_that(float(np.max(np.abs(bank.evaluate(1, coords) - bank[1].values))), less_than_or_equal_to(1e-15))


def test_scaling_and_removing_filters():
    bank = utils.quadrant_bank(SHAPE)
    scaled = frame_bounds(bank.scaled(2.0))
    assert_that(scaled.A, close_to(4.0, 1e-12))
    assert_that(scaled.B, close_to(4.0, 1e-12))
    assert_that(scaled.tight, is_(True))
    fewer = bank.without(2, -2)
    assert_that(fewer.indices, equal_to([1, -1]))
    assert_that(fewer.lineage == bank.lineage, is_(False))
    reduced, full = frame_bounds(fewer), frame_bounds(bank)
    assert_that(reduced.A <= full.A and reduced.B <= full.B, is_(True))
    assert_that(reduced.A, equal_to(0.0))


def test_bank_manifest():
    bank = utils.quadrant_bank(SHAPE)
    assert_that(
        bank.manifest(),
        has_entries({"kernel": "shannon", "kind": "plain", "mapper": "translation", "indices": [1, -1, 2, -2]}),
    )


def test_bank_rejects_duplicate_and_misshapen_filters():
    bank = utils.quadrant_bank(SHAPE)
    with pytest.raises(EwtValidationError):
        FilterBank(bank.filters + bank.filters[:1], kind="plain", kernel=bank.kernel, grid=bank.grid)
    with pytest.raises(EwtValidationError):
        FilterBank(bank.filters, kind="plain", kernel=bank.kernel, grid=FrequencyGrid((16, 16)))


def test_gabor_closed_form_spatial_filter():
    """The Gaussian spatial profile matches the sampled Gabor filter without a lattice sum."""
    grid = FrequencyGrid((128, 128))
    kernel = get_kernel("gabor")
    gamma = AffineMap(np.eye(2) * 8.0, [0.125, -0.0625])
    fourier = idft2(ComplexField(build_filter(kernel, gamma, grid, 1).values)).data
    spatial = spatial_filter_affine(spatial_kernel(kernel), gamma.matrix, gamma.center, grid)
    error = np.max(np.abs(spatial.data - fourier)) / np.max(np.abs(fourier))
    assert_that(float(error), less_than_or_equal_to(constants.SPATIAL_TOLERANCE))


def test_spatial_kernel_needs_a_closed_form():
    kernel = separable_kernel(lambda v: np.ones_like(v), "flat", KernelSupport("square", 0.5), compactly_supported=True)
    with pytest.raises(EwtValidationError):
        spatial_kernel(kernel)


def test_dyadic_levels_are_rescaled_copies():
    """psi_{1,n}(xi) == 2 psi_{0,n}(2 xi - omega_n) samplewise."""
    bank = dyadic_bank_2d(2, 0.25, get_kernel("gabor"), FrequencyGrid(SHAPE))
    coords = bank.grid.coordinates()
    for n, center in enumerate(dyadic_centers(0.25)):
        rescaled = 2.0 * bank.evaluate(n, 2.0 * coords - np.asarray(center))
        assert_that(float(np.max(np.abs(bank[3 + n].values - rescaled))), less_than_or_equal_to(1e-12))


def test_symmetric_filters_keep_the_plain_norm():
    """Disjoint mirror supports give ||chi_n|| == ||psi_n||."""
    plain = utils.quadrant_bank(SHAPE)
    bank = build_symmetric_bank(plain)
    for n in bank.indices:
        assert_that(
            float(np.linalg.norm(bank[n].values)), close_to(float(np.linalg.norm(plain[n].values)), 1e-12)
        )
