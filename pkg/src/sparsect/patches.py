"""Overlapping patch extraction and its exact adjoint.

A patch geometry fixes the raster of patch top-left corners and the
row-major vectorization inside each patch, so that extraction is a pure
selection operator and aggregation is its transpose.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import GeometryError


@dataclass(frozen=True)
class PatchGeometry:
    """Grid of fully interior patches over an image.

    Patch columns are ordered row-major over top-left corners; pixels within
    a patch are vectorized row-major.  No padding or wrap-around: every patch
    lies entirely inside the image.
    """

    image_height: int
    image_width: int
    patch_side: int
    stride: int = 1

    def __post_init__(self):
        if self.patch_side < 1 or self.stride < 1:
            raise GeometryError("patch_side and stride must be >= 1")
        if self.patch_side > min(self.image_height, self.image_width):
            raise GeometryError(
                f"patch_side {self.patch_side} exceeds image "
                f"{self.image_height}x{self.image_width}"
            )

    @property
    def patch_dim(self) -> int:
        return self.patch_side * self.patch_side

    @property
    def grid_shape(self) -> tuple[int, int]:
        rows = (self.image_height - self.patch_side) // self.stride + 1
        cols = (self.image_width - self.patch_side) // self.stride + 1
        return rows, cols

    @property
    def patch_count(self) -> int:
        rows, cols = self.grid_shape
        return rows * cols


def _check_image(image: np.ndarray, geom: PatchGeometry) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    if image.shape != (geom.image_height, geom.image_width):
        raise GeometryError(
            f"image shape {image.shape} does not match geometry "
            f"{geom.image_height}x{geom.image_width}"
        )
    return image


def extract_patches(image: np.ndarray, geom: PatchGeometry) -> np.ndarray:
    """Return the n-by-N matrix whose column i is the i-th vectorized patch."""
    image = _check_image(image, geom)
    p, s = geom.patch_side, geom.stride
    windows = sliding_window_view(image, (p, p))[::s, ::s]  # (rows, cols, p, p)
    cols = windows.transpose(2, 3, 0, 1).reshape(geom.patch_dim, geom.patch_count)
    return np.ascontiguousarray(cols)


def aggregate_patches(columns: np.ndarray, geom: PatchGeometry) -> np.ndarray:
    """Scatter patch columns back onto the image grid, summing overlaps.

    Exact adjoint of :func:`extract_patches`: for any image x and columns C,
    <extract(x), C> == <x, aggregate(C)>.
    """
    columns = np.asarray(columns, dtype=np.float64)
    rows, cols = geom.grid_shape
    p, s = geom.patch_side, geom.stride
    if columns.shape != (geom.patch_dim, geom.patch_count):
        raise GeometryError(
            f"columns shape {columns.shape} does not match geometry "
            f"({geom.patch_dim}, {geom.patch_count})"
        )
    stacked = columns.reshape(p, p, rows, cols)
    out = np.zeros((geom.image_height, geom.image_width))
    # Fixed accumulation order over in-patch offsets keeps results bit-exact.
    for dr in range(p):
        for dc in range(p):
            out[dr : dr + rows * s : s, dc : dc + cols * s : s] += stacked[dr, dc]
    return out


def overlap_counts(geom: PatchGeometry) -> np.ndarray:
    """Per-pixel number of covering patches, as an integer image."""
    rows, cols = geom.grid_shape
    p, s = geom.patch_side, geom.stride
    out = np.zeros((geom.image_height, geom.image_width), dtype=np.int64)
    for dr in range(p):
        for dc in range(p):
            out[dr : dr + rows * s : s, dc : dc + cols * s : s] += 1
    return out
