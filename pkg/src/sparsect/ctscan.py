"""Desk-scale 2D parallel-beam CT: projector, noise model, weighting, FBP.

Images live on a square pixel grid in water-1000 units (see phantoms);
sinograms store line integrals in unit*mm.  Forward and back projection
share one exact ray-grid intersection routine, so the pair is adjoint up
to floating-point summation order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import GeometryError


@dataclass(frozen=True)
class ScanGeometry:
    """Parallel-beam layout: view angles cover [0, pi) uniformly."""

    image_size: int = 128
    pixel_size: float = 2.0
    n_views: int = 180
    n_bins: int = 185
    det_spacing: float = 2.0

    def __post_init__(self) -> None:
        if self.image_size < 1 or self.n_views < 1 or self.n_bins < 1:
            raise GeometryError("image_size, n_views, and n_bins must be positive")
        if self.pixel_size <= 0 or self.det_spacing <= 0:
            raise GeometryError("pixel_size and det_spacing must be positive")

    @property
    def angles(self) -> np.ndarray:
        return np.arange(self.n_views) * (np.pi / self.n_views)

    @property
    def image_shape(self) -> tuple[int, int]:
        return (self.image_size, self.image_size)

    @property
    def sinogram_shape(self) -> tuple[int, int]:
        return (self.n_views, self.n_bins)

    def covers_image(self) -> bool:
        """True when the detector spans the image diagonal at every angle."""
        diagonal = np.hypot(self.image_size * self.pixel_size,
                            self.image_size * self.pixel_size)
        return self.n_bins * self.det_spacing >= diagonal


@dataclass(frozen=True)
class NoiseModel:
    """Photon-counting statistics of one detector reading.

    Counts are Poisson around incident_photons * exp(-mu * p) plus additive
    zero-mean Gaussian electronic noise; ``attenuation_per_unit`` converts a
    line integral in unit*mm to the dimensionless optical depth (water at
    1000 units maps to 0.02/mm).
    """

    incident_photons: float = 1.0e4
    electronic_sigma: float = 5.0
    attenuation_per_unit: float = 2.0e-5

    def __post_init__(self) -> None:
        if self.incident_photons <= 0:
            raise ValueError("incident_photons must be positive")
        if self.electronic_sigma < 0:
            raise ValueError("electronic_sigma must be nonnegative")
        if self.attenuation_per_unit <= 0:
            raise ValueError("attenuation_per_unit must be positive")


@njit(cache=True)
def _trace_ray(px0, py0, dx, dy, n_cols, n_rows, delta, idx_buf, len_buf):
    """Exact pixel intersection lengths of one ray segment with the grid.

    The segment runs from (px0, py0) along (dx, dy); alpha in [0, 1]
    parameterizes it.  Fills flat row-major pixel indices and lengths in mm,
    returning the number of crossed pixels.
    """
    length = np.sqrt(dx * dx + dy * dy)
    if length <= 0.0:
        return 0
    x_min = -0.5 * n_cols * delta
    y_min = -0.5 * n_rows * delta
    x_max = -x_min
    y_max = -y_min

    big = 1.0e30
    a_lo = 0.0
    a_hi = 1.0
    if dx != 0.0:
        ax0 = (x_min - px0) / dx
        ax1 = (x_max - px0) / dx
        a_lo = max(a_lo, min(ax0, ax1))
        a_hi = min(a_hi, max(ax0, ax1))
    elif px0 <= x_min or px0 >= x_max:
        return 0
    if dy != 0.0:
        ay0 = (y_min - py0) / dy
        ay1 = (y_max - py0) / dy
        a_lo = max(a_lo, min(ay0, ay1))
        a_hi = min(a_hi, max(ay0, ay1))
    elif py0 <= y_min or py0 >= y_max:
        return 0
    if a_lo >= a_hi:
        return 0

    x_entry = px0 + a_lo * dx
    y_entry = py0 + a_lo * dy
    i = int(np.floor((x_entry - x_min) / delta))
    j = int(np.floor((y_entry - y_min) / delta))
    i = min(max(i, 0), n_cols - 1)
    j = min(max(j, 0), n_rows - 1)

    if dx > 0.0:
        step_i = 1
        ax_next = (x_min + (i + 1) * delta - px0) / dx
        dax = delta / dx
    elif dx < 0.0:
        step_i = -1
        ax_next = (x_min + i * delta - px0) / dx
        dax = -delta / dx
    else:
        step_i = 0
        ax_next = big
        dax = 0.0
    if dy > 0.0:
        step_j = 1
        ay_next = (y_min + (j + 1) * delta - py0) / dy
        day = delta / dy
    elif dy < 0.0:
        step_j = -1
        ay_next = (y_min + j * delta - py0) / dy
        day = -delta / dy
    else:
        step_j = 0
        ay_next = big
        day = 0.0

    count = 0
    a_cur = a_lo
    for _ in range(n_cols + n_rows + 4):
        if a_cur >= a_hi - 1e-14:
            break
        a_next = min(ax_next, ay_next)
        if a_next > a_hi:
            a_next = a_hi
        seg = (a_next - a_cur) * length
        if seg > 0.0 and 0 <= i < n_cols and 0 <= j < n_rows:
            # Row 0 sits at the top of the image (largest y).
            idx_buf[count] = (n_rows - 1 - j) * n_cols + i
            len_buf[count] = seg
            count += 1
        if a_next >= a_hi:
            break
        if ax_next <= a_next:
            i += step_i
            ax_next += dax
        if ay_next <= a_next:
            j += step_j
            ay_next += day
        a_cur = a_next
    return count


@njit(cache=True)
def _forward_kernel(image_flat, n_rows, n_cols, delta, angles, n_bins,
                    det_spacing, s_max):
    n_views = angles.shape[0]
    sino = np.zeros((n_views, n_bins))
    idx_buf = np.empty(n_cols + n_rows + 4, dtype=np.int64)
    len_buf = np.empty(n_cols + n_rows + 4, dtype=np.float64)
    t0 = -0.5 * (n_bins - 1) * det_spacing
    for v in range(n_views):
        ct = np.cos(angles[v])
        st = np.sin(angles[v])
        for b in range(n_bins):
            t = t0 + b * det_spacing
            px0 = t * ct + s_max * st
            py0 = t * st - s_max * ct
            dx = -2.0 * s_max * st
            dy = 2.0 * s_max * ct
            m = _trace_ray(px0, py0, dx, dy, n_cols, n_rows, delta,
                           idx_buf, len_buf)
            acc = 0.0
            for q in range(m):
                acc += len_buf[q] * image_flat[idx_buf[q]]
            sino[v, b] = acc
    return sino


@njit(cache=True)
def _back_kernel(sino, n_rows, n_cols, delta, angles, n_bins,
                 det_spacing, s_max):
    image_flat = np.zeros(n_rows * n_cols)
    idx_buf = np.empty(n_cols + n_rows + 4, dtype=np.int64)
    len_buf = np.empty(n_cols + n_rows + 4, dtype=np.float64)
    t0 = -0.5 * (n_bins - 1) * det_spacing
    for v in range(angles.shape[0]):
        ct = np.cos(angles[v])
        st = np.sin(angles[v])
        for b in range(n_bins):
            value = sino[v, b]
            if value == 0.0:
                continue
            t = t0 + b * det_spacing
            px0 = t * ct + s_max * st
            py0 = t * st - s_max * ct
            dx = -2.0 * s_max * st
            dy = 2.0 * s_max * ct
            m = _trace_ray(px0, py0, dx, dy, n_cols, n_rows, delta,
                           idx_buf, len_buf)
            for q in range(m):
                image_flat[idx_buf[q]] += len_buf[q] * value
    return image_flat


def _ray_extent(geometry: ScanGeometry) -> float:
    side = geometry.image_size * geometry.pixel_size
    return float(np.hypot(side, side))


def forward_project(image: np.ndarray, geometry: ScanGeometry) -> np.ndarray:
    """Line integrals of the image along every (view, bin) ray, in unit*mm."""
    img = np.ascontiguousarray(image, dtype=np.float64)
    if img.shape != geometry.image_shape:
        raise GeometryError(
            f"image shape {img.shape} does not match geometry "
            f"{geometry.image_shape}"
        )
    return _forward_kernel(
        img.ravel(), geometry.image_size, geometry.image_size,
        float(geometry.pixel_size), geometry.angles, geometry.n_bins,
        float(geometry.det_spacing), _ray_extent(geometry),
    )


def back_project(sino: np.ndarray, geometry: ScanGeometry) -> np.ndarray:
    """Exact adjoint of :func:`forward_project`."""
    data = np.ascontiguousarray(sino, dtype=np.float64)
    if data.shape != geometry.sinogram_shape:
        raise GeometryError(
            f"sinogram shape {data.shape} does not match geometry "
            f"{geometry.sinogram_shape}"
        )
    flat = _back_kernel(
        data, geometry.image_size, geometry.image_size,
        float(geometry.pixel_size), geometry.angles, geometry.n_bins,
        float(geometry.det_spacing), _ray_extent(geometry),
    )
    return flat.reshape(geometry.image_shape)


def simulate_counts(image: np.ndarray, geometry: ScanGeometry,
                    noise: NoiseModel, seed) -> np.ndarray:
    """Noisy detector counts for one scan of the image."""
    sino = forward_project(image, geometry)
    rng = np.random.default_rng(seed)
    mean = noise.incident_photons * np.exp(-noise.attenuation_per_unit * sino)
    counts = rng.poisson(mean).astype(np.float64)
    if noise.electronic_sigma > 0:
        counts += rng.normal(0.0, noise.electronic_sigma, size=counts.shape)
    return counts


def counts_to_sinogram(counts: np.ndarray, noise: NoiseModel) -> np.ndarray:
    """Log-transform counts back to line integrals in unit*mm.

    Counts are floored at 0.1 so the log stays finite on photon-starved rays.
    """
    floored = np.maximum(np.asarray(counts, dtype=np.float64), 0.1)
    return np.log(noise.incident_photons / floored) / noise.attenuation_per_unit


def counts_to_weights(counts: np.ndarray, noise: NoiseModel) -> np.ndarray:
    """Statistical ray weights counts^2 / (counts + sigma^2).

    Rays with nonpositive count (or nonpositive variance estimate) get zero
    weight; the rest are capped at the incident photon count.
    """
    c = np.asarray(counts, dtype=np.float64)
    denom = c + noise.electronic_sigma ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where((c > 0) & (denom > 0), c * c / denom, 0.0)
    return np.clip(w, 0.0, noise.incident_photons)


@dataclass(frozen=True)
class WeightedScan:
    """One simulated measurement: line integrals plus per-ray weights."""

    sinogram: np.ndarray
    weights: np.ndarray
    counts: np.ndarray


def make_weighted_scan(image: np.ndarray, geometry: ScanGeometry,
                       noise: NoiseModel, seed) -> WeightedScan:
    counts = simulate_counts(image, geometry, noise, seed)
    return WeightedScan(
        sinogram=counts_to_sinogram(counts, noise),
        weights=counts_to_weights(counts, noise),
        counts=counts,
    )


def sqs_diagonal(geometry: ScanGeometry, weights: np.ndarray) -> np.ndarray:
    """Diagonal majorizer of the data term: A^T W (A 1), as an image."""
    ones = np.ones(geometry.image_shape)
    row_sums = forward_project(ones, geometry)
    return back_project(weights * row_sums, geometry)


def ramp_filter_response(n_pad: int, det_spacing: float,
                         cutoff: float) -> np.ndarray:
    """Frequency response of the band-limited ramp with a raised-cosine taper.

    Built from the exact spatial-domain ramp taps (value 1/(4 d^2) at zero
    lag, -1/(pi n d)^2 at odd lags) so the DC response is slightly positive,
    then apodized to zero above ``cutoff`` times the Nyquist frequency.
    """
    if cutoff <= 0 or cutoff > 1:
        raise ValueError("cutoff must lie in (0, 1]")
    taps = np.zeros(n_pad)
    taps[0] = 1.0 / (4.0 * det_spacing ** 2)
    n = np.arange(1, n_pad // 2 + 1)
    odd = n[n % 2 == 1]
    values = -1.0 / (np.pi * odd * det_spacing) ** 2
    taps[odd] = values
    taps[-odd] = values
    response = np.real(np.fft.rfft(taps)) * det_spacing
    freqs = np.fft.rfftfreq(n_pad, d=det_spacing)
    nyquist = 0.5 / det_spacing
    window = np.where(
        freqs <= cutoff * nyquist,
        0.5 * (1.0 + np.cos(np.pi * freqs / (cutoff * nyquist))),
        0.0,
    )
    return response * window


def fbp(sino: np.ndarray, geometry: ScanGeometry,
        cutoff: float = 0.4) -> np.ndarray:
    """Filtered back-projection with an apodized ramp, linear interpolation.

    Output is the raw reconstruction in image units; no clamping is applied.
    """
    data = np.asarray(sino, dtype=np.float64)
    if data.shape != geometry.sinogram_shape:
        raise GeometryError(
            f"sinogram shape {data.shape} does not match geometry "
            f"{geometry.sinogram_shape}"
        )
    n_bins = geometry.n_bins
    n_pad = 1 << int(np.ceil(np.log2(2 * n_bins)))
    response = ramp_filter_response(n_pad, geometry.det_spacing, cutoff)
    spectrum = np.fft.rfft(data, n=n_pad, axis=1)
    filtered = np.fft.irfft(spectrum * response, n=n_pad, axis=1)[:, :n_bins]

    size = geometry.image_size
    half = (size - 1) / 2.0
    c = np.arange(size)
    x = (c - half) * geometry.pixel_size
    y = (half - c) * geometry.pixel_size
    xx, yy = np.meshgrid(x, y)
    bins = np.arange(n_bins, dtype=np.float64)
    center = (n_bins - 1) / 2.0
    image = np.zeros((size, size))
    for v, angle in enumerate(geometry.angles):
        t = xx * np.cos(angle) + yy * np.sin(angle)
        pos = t / geometry.det_spacing + center
        image += np.interp(pos, bins, filtered[v], left=0.0, right=0.0)
    return image * (np.pi / geometry.n_views)
