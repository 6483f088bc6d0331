"""
End-to-end tests of the staged pipeline on the toy image.
"""

import time

import pytest
from hamcrest import (
    assert_that,
    close_to,
    contains_inanyorder,
    equal_to,
    greater_than,
    has_item,
    is_,
    less_than_or_equal_to,
)

from ewt_config import load_config
from ewt_figures import energy_label
from ewt_io import read_json
from ewt_pipeline import FAILED_MARKER, STAGES, run_pipeline
from ewt_utils import EwtValidationError, StageError

from .ewt_test_client import constants

SMALL = constants.TEST_DATA / "configs" / "small_shannon.json"


def _config(tmp_path, path=SMALL, **overrides):
    return load_config(path, {"out": str(tmp_path / "out"), **overrides})


@pytest.mark.parametrize("name", ["gabor_voronoi", "gabor_watershed", "shannon_voronoi", "shannon_watershed"])
def test_reproduction_configs_reconstruct_exactly(tmp_path, name):
    """Both kernels and both partitions recover the 256x256 toy image."""
    config = _config(tmp_path, constants.CONFIGS / f"{name}.json")
    report = run_pipeline(config)
    assert_that(report.status, equal_to("ok"))
    assert_that(report.stages, equal_to(STAGES))
    assert_that(report.num_modes, equal_to(2 * config.toy.num_waves + 1))
    assert_that(report.mse, less_than_or_equal_to(constants.EXACT_MSE))
    assert_that(report.zero_coverage_fraction, equal_to(0.0))
    toy = read_json(tmp_path / "out" / "toy_modes.json")
    assert_that(len(toy["modes"]), equal_to(report.num_modes))


def test_gabor_voronoi_reproduction_uses_invertible_demons_maps(tmp_path):
    config = _config(tmp_path, constants.CONFIGS / "gabor_voronoi.json")
    assert_that(config.mapper, equal_to("demons"))
    start = time.perf_counter()
    report = run_pipeline(config)
    elapsed = time.perf_counter() - start
    assert_that(report.mse, less_than_or_equal_to(constants.EXACT_MSE))
    assert_that(elapsed, less_than_or_equal_to(60.0))
    bounded = [entry for entry in report.mapping.values() if entry["bounded"]]
    assert_that(len(bounded), greater_than(0))
    for entry in report.mapping.values():
        if entry["bounded"]:
            assert_that(entry["kind"], equal_to("demons"))
            assert_that(entry["roundtrip"], less_than_or_equal_to(0.5))
        else:
            assert_that(entry["kind"], equal_to("affine"))


def test_shannon_run_reports_parseval_residuals(tmp_path):
    report = run_pipeline(_config(tmp_path))
    frame = report.frame
    assert_that(frame["parseval_approximate"], is_(False))
    assert_that(frame["discrete_bounds"], equal_to(None))
    assert_that(frame["A"] > 0, is_(True))
    assert_that(read_json(tmp_path / "out" / "frame_report.json"), equal_to(frame))


def test_gabor_run_reports_discrete_bounds(tmp_path):
    report = run_pipeline(_config(tmp_path, kernel="gabor"))
    assert_that(report.frame["parseval_residuals"], equal_to([]))
    assert_that(report.frame["discrete_bounds"]["tail"] >= 0, is_(True))


def test_band_energies_add_up(tmp_path):
    """Symmetric bands pair Omega_n with Omega_-n, so the bands cover the grid once."""
    report = run_pipeline(_config(tmp_path))
    assert_that(report.band_energies["0"] > 0, is_(True))
    assert_that(sum(report.band_energies.values()), close_to(report.total_energy, 1e-9 * report.total_energy))


def test_runs_are_byte_identical(tmp_path):
    config = _config(tmp_path)
    run_pipeline(config)
    first = (tmp_path / "out" / "run_report.json").read_bytes()
    coefficients = (tmp_path / "out" / "coefficients" / "coeff_0.ewt").read_bytes()
    run_pipeline(config)
    assert_that((tmp_path / "out" / "run_report.json").read_bytes(), equal_to(first))
    assert_that((tmp_path / "out" / "coefficients" / "coeff_0.ewt").read_bytes(), equal_to(coefficients))
    assert_that("detect" in read_json(tmp_path / "out" / "timings.json"), is_(True))


def test_stop_after_partition(tmp_path):
    report = run_pipeline(_config(tmp_path), stop_after="partition")
    out = tmp_path / "out"
    assert_that(report.stages, equal_to(["detect", "partition"]))
    assert_that(report.mse, equal_to(None))
    assert_that((out / "partition" / "labels.json").is_file(), is_(True))
    assert_that((out / "bank").exists(), is_(False))
    assert_that(read_json(out / "run_report.json")["status"], equal_to("ok"))


def test_unknown_stop_stage(tmp_path):
    with pytest.raises(EwtValidationError):
        run_pipeline(_config(tmp_path), stop_after="smooth")


def test_failed_stage_leaves_marker_and_partial_report(tmp_path):
    out = tmp_path / "out"
    with pytest.raises(StageError) as info:
        run_pipeline(_config(tmp_path, input=str(tmp_path / "missing.pfm")))
    assert_that(info.value.stage, equal_to("detect"))
    assert_that(isinstance(info.value.cause, EwtValidationError), is_(True))
    assert_that((out / FAILED_MARKER).read_text(encoding="utf-8").startswith("detect:"), is_(True))
    report = read_json(out / "run_report.json")
    assert_that((report["status"], report["failed_stage"], report["stages"]), equal_to(("failed", "detect", [])))

    # a later successful run clears the marker
    run_pipeline(_config(tmp_path), stop_after="detect")
    assert_that((out / FAILED_MARKER).exists(), is_(False))


def test_figures(tmp_path):
    config = _config(tmp_path, figures={"overlay": True, "regions": True, "spectra": True})
    report = run_pipeline(config)
    assert_that(report.figures, has_item("figures/partition_overlay.png"))
    assert_that(report.figures, has_item("figures/spectrum_0.png"))
    assert_that(report.figures, has_item("figures/region_0.png"))
    for name in report.figures:
        assert_that((tmp_path / "out" / name).is_file(), is_(True))


def test_energy_label():
    assert_that(energy_label(-2, 2.5), equal_to("E_-2 = 2.500000e+00"))


def test_run_on_image_file(tmp_path):
    """A reconstruction written as PFM runs like the generated toy image."""
    report = run_pipeline(_config(tmp_path))
    image = tmp_path / "out" / "reconstruction.pfm"
    rerun = run_pipeline(load_config(SMALL, {"out": str(tmp_path / "again"), "input": str(image)}))
    assert_that(rerun.shape, equal_to(report.shape))
    assert_that(rerun.num_modes, equal_to(report.num_modes))
    assert_that((tmp_path / "again" / "toy_modes.json").exists(), is_(False))


def test_artifact_layout(tmp_path):
    run_pipeline(_config(tmp_path))
    out = tmp_path / "out"
    assert_that(
        [p.name for p in out.iterdir()],
        contains_inanyorder(
            "toy_modes.json",
            "modes.json",
            "partition",
            "maps",
            "bank",
            "frame_report.json",
            "coefficients",
            "dual_zero_coverage.ewt",
            "reconstruction.pfm",
            "reconstruction.ewt",
            "run_report.json",
            "timings.json",
        ),
    )
