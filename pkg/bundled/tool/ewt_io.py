"""Raster and document I/O: PGM/PNG, PFM, EWT1 rasters and JSON documents."""

from __future__ import annotations

import json
import pathlib
import struct
from typing import Any, Dict, Union

import cattrs
import numpy as np
from PIL import Image

from ewt_modes import Mode, ModeSet
from ewt_partition import PartitionLabelMap
from ewt_spectral import RealImage
from ewt_utils import EwtValidationError

PathLike = Union[str, pathlib.Path]

EWT1_MAGIC = b"EWT1"
EWT1_HEADER = struct.Struct("<4sIII")
GRAY_MODES = {"L", "I;16", "I;16L", "I;16B", "I", "F", "1"}

CONVERTER = cattrs.Converter(detailed_validation=False)
CONVERTER.register_unstructure_hook(np.ndarray, lambda value: value.tolist())
CONVERTER.register_unstructure_hook_func(
    lambda cls: isinstance(cls, type) and issubclass(cls, np.generic), lambda value: value.item()
)


def tag(index: int) -> str:
    """File-name tag of a signed index: 0, p1, m1, ..."""
    if index == 0:
        return "0"
    return f"{'p' if index > 0 else 'm'}{abs(index)}"


# **********************************************************
# Images
# **********************************************************
def read_image(path: PathLike) -> RealImage:
    """Grayscale PGM/PNG (8 or 16 bit), PFM or EWT1 raster as float samples."""
    path = pathlib.Path(path)
    if not path.is_file():
        raise EwtValidationError(f"input image {path} does not exist")
    suffix = path.suffix.lower()
    if suffix == ".pfm":
        return RealImage(read_pfm(path))
    if suffix == ".ewt":
        data = read_ewt1(path)
        if np.iscomplexobj(data):
            raise EwtValidationError(f"{path} holds a complex raster, expected an image")
        return RealImage(data)
    try:
        with Image.open(path) as image:
            if image.mode not in GRAY_MODES:
                raise EwtValidationError(f"{path} is a {image.mode} image; only grayscale input is supported")
            data = np.asarray(image, dtype=np.float64)
    except OSError as exc:
        raise EwtValidationError(f"cannot read image {path}: {exc}") from exc
    return RealImage(data)


def write_png(path: PathLike, data: np.ndarray) -> pathlib.Path:
    """uint8 grayscale or RGB array to PNG."""
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.asarray(data, dtype=np.uint8)).save(path)
    return path


def to_gray8(values: np.ndarray) -> np.ndarray:
    """Min-max rescale to 0..255."""
    values = np.asarray(values, dtype=np.float64)
    low, high = float(values.min()), float(values.max())
    if high <= low:
        return np.zeros(values.shape, dtype=np.uint8)
    return np.round(255.0 * (values - low) / (high - low)).astype(np.uint8)


# **********************************************************
# PFM (single channel, little-endian, rows stored bottom-up)
# **********************************************************
def write_pfm(path: PathLike, data: np.ndarray) -> pathlib.Path:
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))
    if data.ndim != 2:
        raise EwtValidationError("PFM holds a single 2D channel")
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    height, width = data.shape
    with path.open("wb") as stream:
        stream.write(f"Pf\n{width} {height}\n-1.0\n".encode("ascii"))
        stream.write(np.flipud(data).astype("<f4").tobytes())
    return path


def read_pfm(path: PathLike) -> np.ndarray:
    with pathlib.Path(path).open("rb") as stream:
        kind = stream.readline().strip()
        if kind != b"Pf":
            raise EwtValidationError(f"{path} is not a grayscale PFM file")
        width, height = (int(v) for v in stream.readline().split())
        scale = float(stream.readline().strip())
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(stream.read(), dtype=dtype)
    if data.size != width * height:
        raise EwtValidationError(f"{path} is truncated")
    return np.flipud(data.reshape(height, width)).astype(np.float64)


# **********************************************************
# EWT1 rasters: "EWT1", u32 width, u32 height, u32 channels, then <f8 samples
# **********************************************************
def write_ewt1(path: PathLike, data: np.ndarray) -> pathlib.Path:
    data = np.asarray(data)
    if data.ndim == 1:
        data = data[None, :]
    if data.ndim != 2:
        raise EwtValidationError(f"EWT1 rasters are 2D, got {data.ndim}D")
    height, width = data.shape
    if np.iscomplexobj(data):
        channels = 2
        payload = np.stack([data.real, data.imag], axis=-1).astype("<f8")
    else:
        channels = 1
        payload = data.astype("<f8")
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as stream:
        stream.write(EWT1_HEADER.pack(EWT1_MAGIC, width, height, channels))
        stream.write(payload.tobytes())
    return path


def read_ewt1(path: PathLike) -> np.ndarray:
    raw = pathlib.Path(path).read_bytes()
    if len(raw) < EWT1_HEADER.size:
        raise EwtValidationError(f"{path} is too short for an EWT1 header")
    magic, width, height, channels = EWT1_HEADER.unpack_from(raw)
    if magic != EWT1_MAGIC:
        raise EwtValidationError(f"{path} is not an EWT1 raster")
    if channels not in (1, 2):
        raise EwtValidationError(f"{path} has unsupported channel count {channels}")
    values = np.frombuffer(raw, dtype="<f8", offset=EWT1_HEADER.size)
    if values.size != width * height * channels:
        raise EwtValidationError(f"{path} is truncated")
    values = values.reshape(height, width, channels).astype(np.float64)
    if channels == 2:
        return values[..., 0] + 1j * values[..., 1]
    return values[..., 0]


# **********************************************************
# JSON documents
# **********************************************************
def write_json(path: PathLike, document: Any) -> pathlib.Path:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(CONVERTER.unstructure(document), indent=4, sort_keys=True, ensure_ascii=False)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def read_json(path: PathLike) -> Dict[str, Any]:
    path = pathlib.Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise EwtValidationError(f"cannot read JSON document {path}: {exc}") from exc


def modes_document(modes: ModeSet) -> Dict[str, Any]:
    return {
        "modes": [CONVERTER.unstructure(mode) for mode in modes.modes],
        "symmetric": modes.symmetric,
        "shape": list(modes.shape),
    }


def modes_from_document(document: Dict[str, Any]) -> ModeSet:
    try:
        modes = [CONVERTER.structure(item, Mode) for item in document["modes"]]
        return ModeSet(modes, tuple(document["shape"]), bool(document.get("symmetric", False)))
    except (KeyError, TypeError, ValueError) as exc:
        raise EwtValidationError(f"malformed mode document: {exc}") from exc


def write_partition(directory: PathLike, partition: PartitionLabelMap) -> pathlib.Path:
    """labels.ewt (labels as floats) plus the labels.json sidecar."""
    directory = pathlib.Path(directory)
    write_ewt1(directory / "labels.ewt", partition.labels.astype(np.float64))
    labels = partition.label_order()
    sidecar = {
        "num_regions": len(labels),
        "ndim": partition.labels.ndim,
        "symmetric": partition.symmetric,
        "labels": labels,
        "method": partition.method,
        "seeds": {str(k): list(v) for k, v in sorted(partition.seeds.items())},
        "warnings": list(partition.warnings),
    }
    return write_json(directory / "labels.json", sidecar)


def read_partition(directory: PathLike) -> PartitionLabelMap:
    directory = pathlib.Path(directory)
    sidecar = read_json(directory / "labels.json")
    labels = np.rint(read_ewt1(directory / "labels.ewt")).astype(np.int64)
    if labels.shape[0] == 1 and sidecar.get("ndim") == 1:
        labels = labels[0]
    seeds = {int(k): tuple(v) for k, v in sidecar.get("seeds", {}).items()}
    return PartitionLabelMap(
        labels,
        symmetric=bool(sidecar["symmetric"]),
        seeds=seeds,
        method=sidecar.get("method", "voronoi"),
        warnings=tuple(sidecar.get("warnings", ())),
    )


def write_map(directory: PathLike, index: int, gamma) -> pathlib.Path:
    """Map metadata JSON; dense maps also get their displacement rasters."""
    directory = pathlib.Path(directory)
    metadata = {"region": index, **gamma.metadata()}
    if getattr(gamma, "kind", None) == "demons":
        name = f"map_{tag(index)}"
        for field, disp in (("forward", gamma.forward_disp), ("inverse", gamma.inverse_disp)):
            write_ewt1(directory / f"{name}_{field}_dx.ewt", disp[..., 0])
            write_ewt1(directory / f"{name}_{field}_dy.ewt", disp[..., 1])
        metadata["rasters"] = [f"{name}_{f}_{c}.ewt" for f in ("forward", "inverse") for c in ("dx", "dy")]
    return write_json(directory / f"map_{tag(index)}.json", metadata)


def write_bank(directory: PathLike, bank) -> pathlib.Path:
    directory = pathlib.Path(directory)
    for item in bank.filters:
        write_ewt1(directory / f"filter_{tag(item.index)}.ewt", item.values)
    return write_json(directory / "bank.json", bank.manifest())


def write_coefficients(directory: PathLike, coeffs) -> pathlib.Path:
    directory = pathlib.Path(directory)
    for index, band in zip(coeffs.indices, coeffs.bands):
        write_ewt1(directory / f"coeff_{tag(index)}.ewt", band)
    return write_json(directory / "coefficients.json", coeffs.manifest())
