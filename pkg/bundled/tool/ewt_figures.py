"""Figure exports: partition overlays, region/support comparisons, band spectra."""

from __future__ import annotations

import pathlib
from typing import Dict, List, Mapping

import attrs
import matplotlib

matplotlib.use("Agg")

# pylint: disable=wrong-import-position
import numpy as np
from matplotlib import pyplot as plt

from ewt_io import tag, to_gray8, write_png
from ewt_kernels import KernelSupport
from ewt_mapping import preimage_indicator
from ewt_partition import PartitionLabelMap, RegionMask
from ewt_spectral import FrequencyGrid, RealImage
from ewt_transform import CoefficientSet, wavelet_spectrum

BOUNDARY_RGB = (255, 0, 0)
REGION_RGB = (0, 114, 178)
SUPPORT_RGB = (230, 159, 0)
BOTH_RGB = (0, 158, 115)


@attrs.define
class FigureSet:
    paths: List[pathlib.Path] = attrs.field(factory=list)
    annotations: Dict[int, str] = attrs.field(factory=dict)


def energy_label(index: int, energy: float) -> str:
    return f"E_{index} = {energy:.6e}"


def partition_overlay(log_spec: RealImage, partition: PartitionLabelMap) -> np.ndarray:
    """Gray log spectrum with boundary samples painted red."""
    gray = to_gray8(np.atleast_2d(log_spec.data))
    rgb = np.repeat(gray[..., None], 3, axis=-1)
    rgb[np.atleast_2d(partition.boundary_mask)] = BOUNDARY_RGB
    return rgb


def region_comparison(region: RegionMask, gamma, support: KernelSupport) -> np.ndarray:
    """Omega_n against the preimage of the support under gamma."""
    grid = FrequencyGrid(region.mask.shape)
    preimage = preimage_indicator(gamma, support, grid)
    rgb = np.zeros(region.mask.shape + (3,), dtype=np.uint8)
    rgb[region.mask & ~preimage] = REGION_RGB
    rgb[preimage & ~region.mask] = SUPPORT_RGB
    rgb[region.mask & preimage] = BOTH_RGB
    return rgb


def spectrum_panel(path: pathlib.Path, coeffs: CoefficientSet, index: int, energy: float) -> str:
    label = energy_label(index, energy)
    spectrum = np.atleast_2d(wavelet_spectrum(coeffs, index).data)
    figure, axes = plt.subplots(figsize=(4, 4))
    axes.imshow(spectrum, cmap="gray")
    axes.set_title(label)
    axes.axis("off")
    path.parent.mkdir(parents=True, exist_ok=True)
    figure.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(figure)
    return label


def export_figures(
    directory,
    log_spec: RealImage,
    partition: PartitionLabelMap,
    regions: List[RegionMask],
    maps: Mapping[int, object],
    support: KernelSupport,
    coeffs: CoefficientSet,
    energies: Mapping[int, float],
    overlay: bool = True,
    comparisons: bool = True,
    spectra: bool = True,
) -> FigureSet:
    directory = pathlib.Path(directory)
    figures = FigureSet()
    if overlay:
        figures.paths.append(write_png(directory / "partition_overlay.png", partition_overlay(log_spec, partition)))
    if comparisons and log_spec.data.ndim == 2:
        for region in regions:
            if region.index in maps:
                image = region_comparison(region, maps[region.index], support)
                figures.paths.append(write_png(directory / f"region_{tag(region.index)}.png", image))
    if spectra:
        for index in coeffs.indices:
            path = directory / f"spectrum_{tag(index)}.png"
            figures.annotations[index] = spectrum_panel(path, coeffs, index, energies[index])
            figures.paths.append(path)
    return figures
