"""End-to-end run: detect, partition, map, filters, frame, transform, dual, reconstruct, report."""

from __future__ import annotations

import pathlib
from typing import Any, Dict, List, Optional

import attrs
import numpy as np

from ewt_config import PipelineConfig
from ewt_demons import estimate_diffeomorphism_demons
from ewt_figures import export_figures
from ewt_filterbank import build_plain_bank, build_symmetric_bank, symmetric_maps
from ewt_io import (
    CONVERTER,
    modes_document,
    read_image,
    write_bank,
    write_coefficients,
    write_ewt1,
    write_json,
    write_map,
    write_partition,
    write_pfm,
)
from ewt_kernels import get_kernel
from ewt_log import captured_warnings, log_always, log_error, log_to_output, log_warning
from ewt_mapping import affine_map_for_region, preimage_indicator, roundtrip_error, star_shaped_map
from ewt_modes import detect_modes, symmetrize_modes
from ewt_partition import region_masks, voronoi_partition, watershed_partition
from ewt_spectral import FrequencyGrid, band_energy, dft2, log_magnitude, mse, total_energy
from ewt_toy import make_toy_image
from ewt_transform import (
    discrete_frame_bounds,
    discrete_parseval_check,
    dual_bank,
    forward,
    frame_bounds,
    reconstruct_with_residual,
)
from ewt_utils import EwtValidationError, StageError, content_hash, timed_stage

STAGES = ["detect", "partition", "map", "filters", "frame", "transform", "dual", "reconstruct", "report"]
FAILED_MARKER = "FAILED"


@attrs.define
class RunReport:
    schema: str
    config: Dict[str, Any]
    shape: List[int]
    status: str = "running"
    stages: List[str] = attrs.field(factory=list)
    failed_stage: Optional[str] = None
    error: Optional[str] = None
    num_modes: int = 0
    num_regions: int = 0
    modes: List[Dict[str, Any]] = attrs.field(factory=list)
    mapping: Dict[str, Dict[str, Any]] = attrs.field(factory=dict)
    band_energies: Dict[str, float] = attrs.field(factory=dict)
    total_energy: float = 0.0
    frame: Optional[Dict[str, Any]] = None
    zero_coverage_fraction: Optional[float] = None
    mse: Optional[float] = None
    imaginary_residual: Optional[float] = None
    warnings: List[str] = attrs.field(factory=list)
    figures: List[str] = attrs.field(factory=list)
    timings: Dict[str, float] = attrs.field(factory=dict)

    def document(self) -> Dict[str, Any]:
        """Report without timings, byte-stable across identical runs."""
        doc = CONVERTER.unstructure(self)
        doc.pop("timings")
        return doc


@attrs.define
class _Run:
    """Artifacts handed from one stage to the next."""

    config: PipelineConfig
    out: pathlib.Path
    image: Any = None
    spectrum: Any = None
    log_spec: Any = None
    modes: Any = None
    partition: Any = None
    regions: Any = None
    maps: Dict[int, Any] = attrs.field(factory=dict)
    kernel: Any = None
    bank: Any = None
    coeffs: Any = None
    duals: Any = None


def _load_image(run: _Run):
    config = run.config
    if config.input:
        return read_image(config.input)
    toy = config.toy
    image, truth = make_toy_image(toy.width, toy.height, toy.num_waves, toy.seed, toy.noise)
    write_json(run.out / "toy_modes.json", modes_document(truth))
    return image


def _detect(run: _Run, report: RunReport) -> None:
    run.image = _load_image(run)
    report.shape = list(run.image.shape)
    run.spectrum = dft2(run.image)
    run.log_spec = log_magnitude(run.spectrum)
    modes = symmetrize_modes(
        detect_modes(run.log_spec, run.config.scale_space), run.config.scale_space.min_separation
    )
    run.modes = modes
    report.num_modes = len(modes)
    report.modes = modes_document(modes)["modes"]
    write_json(run.out / "modes.json", modes_document(modes))


def _partition(run: _Run, report: RunReport) -> None:
    if run.config.partition == "watershed":
        run.partition = watershed_partition(run.log_spec, run.modes, run.config.watershed_sigma)
    else:
        run.partition = voronoi_partition(run.modes)
    run.regions = region_masks(run.partition)
    report.num_regions = len(run.regions)
    write_partition(run.out / "partition", run.partition)


def _estimate(run: _Run, region, support, margin):
    mapper = run.config.mapper
    if mapper != "affine" and not region.bounded:
        log_to_output(f"region {region.index} touches the border; using the affine map")
        return affine_map_for_region(region, support, margin)
    if mapper == "star":
        try:
            return star_shaped_map(region, support)
        except EwtValidationError as exc:
            log_warning(f"{exc}; falling back to the affine map")
            return affine_map_for_region(region, support, margin)
    if mapper == "demons":
        return estimate_diffeomorphism_demons(region, support, run.config.fit)
    return affine_map_for_region(region, support, margin)


def _map(run: _Run, report: RunReport) -> None:
    run.kernel = get_kernel(run.config.kernel, ndim=run.image.data.ndim)
    support = run.kernel.support
    margin = 1.0 if run.kernel.compactly_supported else None
    grid = FrequencyGrid(run.image.shape)
    for region in run.regions:
        if region.index < 0:
            continue
        gamma = _estimate(run, region, support, margin)
        run.maps[region.index] = gamma
        mismatch = np.count_nonzero(preimage_indicator(gamma, support, grid) != region.mask)
        report.mapping[str(region.index)] = {
            "kind": gamma.kind,
            "bounded": region.bounded,
            "residual": int(mismatch),
            "fit_residual": getattr(gamma, "residual", None),
            "roundtrip": roundtrip_error(gamma, region.mask),
        }
        write_map(run.out / "maps", region.index, gamma)


def _filters(run: _Run, report: RunReport) -> None:  # pylint: disable=unused-argument
    bounded = {region.index: region.bounded for region in run.regions}
    plain = build_plain_bank(
        run.kernel,
        symmetric_maps(run.maps),
        FrequencyGrid(run.image.shape),
        mapper=run.config.mapper,
        partition_hash=content_hash(run.partition.labels),
        bounded=bounded,
    )
    run.bank = build_symmetric_bank(plain) if run.config.symmetric else plain
    write_bank(run.out / "bank", run.bank)


def _frame(run: _Run, report: RunReport) -> None:
    frame = frame_bounds(run.bank)
    if run.config.discrete_checks:
        if run.kernel.compactly_supported:
            frame = attrs.evolve(frame, parseval=discrete_parseval_check(run.bank, 1.0, run.config.shift_radius))
        else:
            frame = attrs.evolve(
                frame, discrete=discrete_frame_bounds(run.bank, 1.0, max(1, run.config.shift_radius))
            )
    report.frame = frame.document()
    write_json(run.out / "frame_report.json", report.frame)


def _transform(run: _Run, report: RunReport) -> None:  # pylint: disable=unused-argument
    run.coeffs = forward(run.image, run.bank)
    write_coefficients(run.out / "coefficients", run.coeffs)


def _dual(run: _Run, report: RunReport) -> None:
    run.duals = dual_bank(run.bank, run.config.dual_floor)
    report.zero_coverage_fraction = run.duals.zero_coverage_fraction
    write_ewt1(run.out / "dual_zero_coverage.ewt", run.duals.zero_coverage.astype(np.float64))


def _reconstruct(run: _Run, report: RunReport) -> None:
    image, imaginary = reconstruct_with_residual(run.coeffs, run.duals)
    report.mse = mse(image, run.image)
    report.imaginary_residual = imaginary
    if image.data.ndim == 2:
        write_pfm(run.out / "reconstruction.pfm", image.data)
    write_ewt1(run.out / "reconstruction.ewt", image.data)


def band_energies(run: _Run) -> Dict[int, float]:
    """E_n over Omega_n, joined with Omega_-n for symmetric banks."""
    labels = run.partition.labels
    energies = {}
    for index in run.bank.indices:
        mask = labels == index
        if run.bank.kind == "symmetric" and index != 0:
            mask = mask | (labels == -index)
        energies[index] = band_energy(run.spectrum, mask)
    return energies


def _report(run: _Run, report: RunReport) -> None:
    energies = band_energies(run)
    report.band_energies = {str(k): v for k, v in energies.items()}
    report.total_energy = total_energy(run.spectrum)
    toggles = run.config.figures
    if toggles.overlay or toggles.regions or toggles.spectra:
        figures = export_figures(
            run.out / "figures",
            run.log_spec,
            run.partition,
            run.regions,
            run.maps,
            run.kernel.support,
            run.coeffs,
            energies,
            overlay=toggles.overlay,
            comparisons=toggles.regions,
            spectra=toggles.spectra,
        )
        report.figures = [p.relative_to(run.out).as_posix() for p in figures.paths]


_STAGE_FUNCTIONS = {
    "detect": _detect,
    "partition": _partition,
    "map": _map,
    "filters": _filters,
    "frame": _frame,
    "transform": _transform,
    "dual": _dual,
    "reconstruct": _reconstruct,
    "report": _report,
}


def _write_report(out: pathlib.Path, report: RunReport) -> None:
    write_json(out / "run_report.json", report.document())
    write_json(out / "timings.json", report.timings)


def run_pipeline(config: PipelineConfig, stop_after: Optional[str] = None) -> RunReport:
    """Run the stages in order, writing every artifact under `config.out`.

    A failing stage leaves a FAILED marker and a partial report behind and
    re-raises as StageError.
    """
    if stop_after is not None and stop_after not in STAGES:
        raise EwtValidationError(f"unknown stage {stop_after!r}, expected one of {STAGES}")
    out = pathlib.Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / FAILED_MARKER).unlink(missing_ok=True)
    report = RunReport(schema=config.schema, config=CONVERTER.unstructure(config), shape=[])
    run = _Run(config=config, out=out)

    with captured_warnings() as warnings:
        try:
            for stage in STAGES:
                with timed_stage(stage, report.timings):
                    _STAGE_FUNCTIONS[stage](run, report)
                report.stages.append(stage)
                if stage == stop_after:
                    break
        except StageError as exc:
            report.status = "failed"
            report.failed_stage = exc.stage
            report.error = str(exc.cause)
            report.warnings = list(warnings)
            (out / FAILED_MARKER).write_text(f"{exc.stage}: {exc.cause}\n", encoding="utf-8")
            _write_report(out, report)
            log_error(str(exc))
            raise
        report.status = "ok"
        report.warnings = list(warnings)

    _write_report(out, report)
    if report.mse is not None:
        log_always(f"reconstruction MSE {report.mse:.3e} over {report.num_regions} regions")
    return report
