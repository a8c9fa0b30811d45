"""Image quality measures used to compare reconstructions."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def circular_roi(shape: tuple[int, int]) -> np.ndarray:
    """Boolean mask of the circle inscribed in the image rectangle."""
    rows, cols = shape
    r = np.arange(rows)[:, None] - (rows - 1) / 2.0
    c = np.arange(cols)[None, :] - (cols - 1) / 2.0
    radius = min(rows, cols) / 2.0
    return r * r + c * c <= radius * radius


def rmse(reference: np.ndarray, image: np.ndarray,
         roi: np.ndarray | None = None) -> float:
    """Root-mean-square error inside the region of interest.

    Defaults to the inscribed circle, which is the region actually probed
    from every angle in a parallel-beam scan.
    """
    a = np.asarray(reference, dtype=np.float64)
    b = np.asarray(image, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if roi is None:
        roi = circular_roi(a.shape)
    d = (a - b)[roi]
    if d.size == 0:
        raise ValueError("empty region of interest")
    return float(np.sqrt(np.mean(d * d)))


def ssim(reference: np.ndarray, image: np.ndarray, window: int = 8,
         data_range: float | None = None) -> float:
    """Mean structural similarity over uniform valid sliding windows.

    Uses the standard stabilizers C1 = (0.01 L)^2 and C2 = (0.03 L)^2.  When
    ``data_range`` is omitted, L is the spread of the union of both images'
    values, which keeps the measure symmetric in its arguments.
    """
    a = np.asarray(reference, dtype=np.float64)
    b = np.asarray(image, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if window < 1 or window > min(a.shape):
        raise ValueError(f"window {window} does not fit image {a.shape}")
    if data_range is None:
        data_range = float(max(a.max(), b.max()) - min(a.min(), b.min()))
    if data_range <= 0:
        return 1.0

    def window_mean(img: np.ndarray) -> np.ndarray:
        return sliding_window_view(img, (window, window)).mean(axis=(-2, -1))

    mu_a = window_mean(a)
    mu_b = window_mean(b)
    var_a = window_mean(a * a) - mu_a * mu_a
    var_b = window_mean(b * b) - mu_b * mu_b
    cov = window_mean(a * b) - mu_a * mu_b
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    score = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
        (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    )
    return float(score.mean())
