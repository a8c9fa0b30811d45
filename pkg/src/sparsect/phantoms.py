"""Synthetic 2D test objects on the unit square, in water-1000 units.

Images use a scale where air is 0, soft tissue sits near 1000, and dense
bone reaches 2000.  Pixel (0, 0) is the top-left corner; the geometric
y axis points up.
"""

from __future__ import annotations

import numpy as np

#: Classic head phantom ellipses as (value, a, b, x0, y0, angle_deg) with the
#: traditional low-contrast interior values scaled by 1000.
_HEAD_ELLIPSES = (
    (2000.0, 0.6900, 0.9200, 0.0, 0.0, 0.0),
    (-980.0, 0.6624, 0.8740, 0.0, -0.0184, 0.0),
    (-20.0, 0.1100, 0.3100, 0.22, 0.0, -18.0),
    (-20.0, 0.1600, 0.4100, -0.22, 0.0, 18.0),
    (10.0, 0.2100, 0.2500, 0.0, 0.35, 0.0),
    (10.0, 0.0460, 0.0460, 0.0, 0.1, 0.0),
    (10.0, 0.0460, 0.0460, 0.0, -0.1, 0.0),
    (10.0, 0.0460, 0.0230, -0.08, -0.605, 0.0),
    (10.0, 0.0230, 0.0230, 0.0, -0.606, 0.0),
    (10.0, 0.0230, 0.0460, 0.06, -0.605, 0.0),
)


def _grid(size: int) -> tuple[np.ndarray, np.ndarray]:
    if size < 1:
        raise ValueError("size must be positive")
    half = (size - 1) / 2.0
    step = 2.0 / size
    c = np.arange(size)
    x = (c - half) * step
    y = (half - c) * step
    return np.meshgrid(x, y)


def _add_ellipses(image: np.ndarray, x: np.ndarray, y: np.ndarray, ellipses) -> None:
    for value, a, b, x0, y0, angle_deg in ellipses:
        phi = np.deg2rad(angle_deg)
        dx = x - x0
        dy = y - y0
        xr = dx * np.cos(phi) + dy * np.sin(phi)
        yr = -dx * np.sin(phi) + dy * np.cos(phi)
        inside = (xr / a) ** 2 + (yr / b) ** 2 <= 1.0
        image[inside] += value


def shepp_logan(size: int) -> np.ndarray:
    """Classic head phantom with a 2000-unit skull and ~1000-unit interior."""
    x, y = _grid(size)
    image = np.zeros((size, size))
    _add_ellipses(image, x, y, _HEAD_ELLIPSES)
    return image


def disk(size: int, radius: float = 0.6, value: float = 1000.0) -> np.ndarray:
    """Centered uniform disk; handy for projector and filtering checks."""
    if not 0.0 < radius <= 1.0:
        raise ValueError("radius must lie in (0, 1]")
    x, y = _grid(size)
    image = np.zeros((size, size))
    image[x * x + y * y <= radius * radius] = value
    return image


def random_head(size: int, seed) -> np.ndarray:
    """Seeded head-like slice: elliptical shell, soft interior, random blobs.

    Used to build small training sets that share the tissue scale of
    :func:`shepp_logan` without duplicating its geometry.
    """
    rng = np.random.default_rng(seed)
    x, y = _grid(size)
    image = np.zeros((size, size))
    a = 0.70 + 0.08 * rng.uniform(-1.0, 1.0)
    b = 0.90 + 0.05 * rng.uniform(-1.0, 1.0)
    shell = [
        (2000.0, a, b, 0.0, 0.0, 0.0),
        (-980.0, 0.94 * a, 0.94 * b, 0.0, 0.0, 0.0),
    ]
    _add_ellipses(image, x, y, shell)
    blobs = []
    for _ in range(int(rng.integers(4, 9))):
        ba = rng.uniform(0.04, 0.22)
        bb = rng.uniform(0.04, 0.22)
        # Keep each blob inside the soft interior so values stay tissue-like.
        r0 = rng.uniform(0.0, 0.55)
        t0 = rng.uniform(0.0, 2.0 * np.pi)
        value = rng.choice([-1.0, 1.0]) * rng.uniform(20.0, 80.0)
        blobs.append(
            (value, ba, bb, r0 * np.cos(t0) * a, r0 * np.sin(t0) * b,
             rng.uniform(-90.0, 90.0))
        )
    _add_ellipses(image, x, y, blobs)
    return np.clip(image, 0.0, None)


def make_phantom(name: str, size: int, seed=0) -> np.ndarray:
    """Build a named phantom; ``seed`` only affects the random ones."""
    key = name.strip().lower()
    if key == "shepp-logan":
        return shepp_logan(size)
    if key == "disk":
        return disk(size)
    if key == "random-head":
        return random_head(size, seed)
    raise ValueError(f"unknown phantom {name!r}; "
                     "choose from shepp-logan, disk, random-head")
