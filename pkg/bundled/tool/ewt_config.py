"""Pipeline configuration: defaults, JSON config files and flag overrides."""

from __future__ import annotations

import pathlib
from typing import Any, Dict, Mapping, Optional, Union

import attrs
import cattrs
from packaging.version import InvalidVersion, Version

from ewt_demons import MappingFitParams
from ewt_io import CONVERTER, read_json
from ewt_modes import ScaleSpaceParams
from ewt_partition import WATERSHED_SIGMA
from ewt_toy import ToyImageParams
from ewt_transform import DUAL_FLOOR, SHIFT_RADIUS
from ewt_utils import EwtValidationError

SCHEMA = "1.0"

KERNEL_CHOICES = ["gabor", "shannon"]
PARTITION_CHOICES = ["voronoi", "watershed"]
MAPPER_CHOICES = ["affine", "star", "demons"]


def _in(choices):
    def check(_instance, attribute, value):
        if value not in choices:
            raise EwtValidationError(f"{attribute.name} must be one of {choices}, got {value!r}")

    return check


def _non_negative(_instance, attribute, value):
    if value < 0:
        raise EwtValidationError(f"{attribute.name} must be non-negative, got {value}")


def _check_schema(_instance, _attribute, value):
    try:
        found, expected = Version(value), Version(SCHEMA)
    except InvalidVersion as exc:
        raise EwtValidationError(f"invalid schema version {value!r}") from exc
    if found.major != expected.major:
        raise EwtValidationError(f"schema {value} is not compatible with {SCHEMA}")


@attrs.define(frozen=True)
class FigureToggles:
    overlay: bool = True
    regions: bool = True
    spectra: bool = True


@attrs.define(frozen=True)
class PipelineConfig:
    """Everything a run needs; `input` None means the toy image."""

    input: Optional[str] = None
    kernel: str = attrs.field(default="gabor", validator=_in(KERNEL_CHOICES))
    partition: str = attrs.field(default="voronoi", validator=_in(PARTITION_CHOICES))
    mapper: str = attrs.field(default="affine", validator=_in(MAPPER_CHOICES))
    scale_space: ScaleSpaceParams = attrs.field(factory=ScaleSpaceParams)
    fit: MappingFitParams = attrs.field(factory=MappingFitParams)
    toy: ToyImageParams = attrs.field(factory=ToyImageParams)
    figures: FigureToggles = attrs.field(factory=FigureToggles)
    dual_floor: float = attrs.field(default=DUAL_FLOOR, converter=float, validator=_non_negative)
    watershed_sigma: float = attrs.field(default=WATERSHED_SIGMA, converter=float, validator=_non_negative)
    shift_radius: int = attrs.field(default=SHIFT_RADIUS, converter=int, validator=_non_negative)
    symmetric: bool = True
    discrete_checks: bool = True
    out: str = "ewt-out"
    schema: str = attrs.field(default=SCHEMA, validator=_check_schema)


def _get_global_defaults() -> Dict[str, Any]:
    return CONVERTER.unstructure(PipelineConfig())


def _merge(base: Mapping[str, Any], update: Mapping[str, Any]) -> Dict[str, Any]:
    """{**base, **update}, one level deep for nested parameter groups."""
    merged = {**base}
    for key, value in update.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = {**merged[key], **value}
        else:
            merged[key] = value
    return merged


def structure_config(settings: Mapping[str, Any]) -> PipelineConfig:
    unknown = set(settings) - {a.name for a in attrs.fields(PipelineConfig)}
    if unknown:
        raise EwtValidationError(f"unknown configuration keys: {sorted(unknown)}")
    try:
        return CONVERTER.structure(dict(settings), PipelineConfig)
    except EwtValidationError:
        raise
    except (cattrs.BaseValidationError, KeyError, TypeError, ValueError) as exc:
        raise EwtValidationError(f"invalid configuration: {exc}") from exc


def load_config(
    path: Union[str, pathlib.Path, None] = None, overrides: Optional[Mapping[str, Any]] = None
) -> PipelineConfig:
    """Defaults, then the JSON file, then flag overrides (flags win)."""
    settings = _get_global_defaults()
    if path is not None:
        document = read_json(path)
        if not isinstance(document, dict):
            raise EwtValidationError(f"{path} must hold a JSON object")
        settings = _merge(settings, document)
    settings = _merge(settings, {k: v for k, v in (overrides or {}).items() if v is not None})
    return structure_config(settings)
