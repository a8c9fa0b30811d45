"""Binary file formats for images, sinograms and statistical weights.

All rasters share the same layout: an ASCII magic tag, two unsigned 32-bit
little-endian dimensions (rows then columns), then the payload row-major as
32-bit little-endian IEEE-754 floats.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import FormatError

IMAGE_MAGIC = b"MCIMG1"
SINOGRAM_MAGIC = b"MCSIN1"
WEIGHTS_MAGIC = b"MCWGT1"


def _write_raster(path: str | os.PathLike, magic: bytes, data: np.ndarray) -> None:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"raster payload must be 2-D, got shape {arr.shape}")
    rows, cols = arr.shape
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(np.asarray([rows, cols], dtype="<u4").tobytes())
        fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def _read_raster(path: str | os.PathLike, magic: bytes) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(len(magic))
        if head != magic:
            raise FormatError(
                f"{path}: bad magic {head!r}, expected {magic.decode()!r}"
            )
        dims = np.frombuffer(fh.read(8), dtype="<u4")
        if dims.size != 2:
            raise FormatError(f"{path}: truncated header")
        rows, cols = int(dims[0]), int(dims[1])
        payload = fh.read(4 * rows * cols)
    if len(payload) != 4 * rows * cols:
        raise FormatError(f"{path}: truncated payload ({rows}x{cols} expected)")
    return np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(rows, cols)


def write_image(path: str | os.PathLike, image: np.ndarray) -> None:
    _write_raster(path, IMAGE_MAGIC, image)


def read_image(path: str | os.PathLike) -> np.ndarray:
    return _read_raster(path, IMAGE_MAGIC)


def write_sinogram(path: str | os.PathLike, sino: np.ndarray) -> None:
    _write_raster(path, SINOGRAM_MAGIC, sino)


def read_sinogram(path: str | os.PathLike) -> np.ndarray:
    return _read_raster(path, SINOGRAM_MAGIC)


def write_weights(path: str | os.PathLike, weights: np.ndarray) -> None:
    _write_raster(path, WEIGHTS_MAGIC, weights)


def read_weights(path: str | os.PathLike) -> np.ndarray:
    return _read_raster(path, WEIGHTS_MAGIC)
