"""Penalized weighted-least-squares reconstruction.

Two regularizers share one relaxed augmented-Lagrangian image update with
diagonal majorizers: the layered clustered transform penalty (codes and
cluster assignments refreshed between image updates) and an edge-preserving
pairwise penalty used as a classical baseline.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import coding
from .ctscan import ScanGeometry, WeightedScan, back_project, forward_project, sqs_diagonal
from .model import ModelBundle
from .patches import PatchGeometry, aggregate_patches, extract_patches, overlap_counts


def rho_schedule(r: int, alpha: float) -> float:
    """Relaxation penalty parameter for inner iteration r (1 at r = 0)."""
    if r < 0:
        raise ValueError("iteration index must be nonnegative")
    if r == 0:
        return 1.0
    u = np.pi / (alpha * (r + 1))
    return float(u * np.sqrt(1.0 - (0.5 * u) ** 2))


@dataclass(frozen=True)
class ReconConfig:
    """Settings for reconstruction with the layered transform penalty."""

    beta: float
    code_thresholds: tuple[float, ...]
    outer_iterations: int = 100
    inner_iterations: int = 2
    alpha: float = 1.999

    def __post_init__(self) -> None:
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if any(t < 0 for t in self.code_thresholds):
            raise ValueError("code thresholds must be nonnegative")
        if self.outer_iterations < 1 or self.inner_iterations < 1:
            raise ValueError("iteration counts must be positive")
        if not 1.0 <= self.alpha < 2.0:
            raise ValueError("alpha must lie in [1, 2)")


@dataclass
class ReconTrace:
    """Objective pieces recorded once per outer iteration."""

    rows: list[tuple[int, float, float, float]] = field(default_factory=list)
    elapsed_seconds: float = 0.0

    def record(self, iteration: int, data_term: float, penalty: float) -> None:
        self.rows.append(
            (iteration, float(data_term), float(penalty),
             float(data_term) + float(penalty))
        )

    @property
    def totals(self) -> np.ndarray:
        return np.array([row[3] for row in self.rows])

    def save_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("iteration,data_term,penalty,objective\n")
            for iteration, data_term, penalty, total in self.rows:
                fh.write(f"{iteration},{data_term!r},{penalty!r},{total!r}\n")


def _weighted_gradient(
    x: np.ndarray, scan: WeightedScan, geometry: ScanGeometry
) -> tuple[np.ndarray, float]:
    """Data-term gradient A^T W (A x - y) and value 0.5 ||A x - y||_W^2."""
    residual = forward_project(x, geometry) - scan.sinogram
    weighted = scan.weights * residual
    value = 0.5 * float(np.sum(weighted * residual))
    return back_project(weighted, geometry), value


def _lalm_sweep(
    x: np.ndarray, zeta: np.ndarray, scan: WeightedScan, geometry: ScanGeometry,
    d_data: np.ndarray, d_penalty: np.ndarray, penalty_gradient, alpha: float,
    iterations: int, on_iteration=None,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Run relaxed augmented-Lagrangian image updates from (x, zeta).

    ``penalty_gradient`` maps the current image to the penalty gradient.
    The penalty parameter starts at one and decreases with the iteration
    index.  Returns the updated image, its data gradient (reusable as the
    next sweep's starting point), and the final data-term value.
    """
    g = zeta.copy()
    h = d_data * x - zeta
    data_value = np.nan
    for r in range(iterations):
        rho = rho_schedule(r, alpha)
        s = rho * (d_data * x - h) + (1.0 - rho) * g
        step = s + penalty_gradient(x)
        denom = rho * d_data + d_penalty
        x = np.maximum(x - np.where(denom > 0, step / denom, 0.0), 0.0)
        zeta, data_value = _weighted_gradient(x, scan, geometry)
        g = (rho * (alpha * zeta + (1.0 - alpha) * g) + g) / (rho + 1.0)
        h = alpha * (d_data * x - zeta) + (1.0 - alpha) * h
        if on_iteration is not None:
            on_iteration(r, x, data_value)
    return x, zeta, data_value


def transform_penalty_value(
    residuals: list[np.ndarray], codes: list[np.ndarray], assign: np.ndarray,
    model: ModelBundle, beta: float, thresholds,
) -> float:
    """beta times (squared encoding residuals plus the counting penalty)."""
    total = 0.0
    for l in range(model.layers):
        d = coding.apply_bank(model, l, residuals[l], assign[l]) - codes[l]
        total += float(np.sum(d * d))
        total += float(thresholds[l]) ** 2 * np.count_nonzero(codes[l])
    return beta * total


def encoding_error_value(
    x: np.ndarray, codes: list[np.ndarray], assign: np.ndarray,
    model: ModelBundle, patch_geom: PatchGeometry, beta: float,
) -> float:
    """Smooth part of the penalty: beta times summed squared encoding residuals."""
    residuals = coding.propagate_residuals(
        extract_patches(x, patch_geom), codes, assign, model
    )
    total = 0.0
    for l in range(model.layers):
        d = coding.apply_bank(model, l, residuals[l], assign[l]) - codes[l]
        total += float(np.sum(d * d))
    return beta * total


def _gradient_from_backprop(
    x: np.ndarray, backprop_total: np.ndarray, layers: int, beta: float,
    patch_geom: PatchGeometry,
) -> np.ndarray:
    cols = extract_patches(x, patch_geom)
    return 2.0 * beta * aggregate_patches(
        layers * cols - backprop_total, patch_geom
    )


def transform_penalty_gradient(
    x: np.ndarray, codes: list[np.ndarray], assign: np.ndarray,
    model: ModelBundle, patch_geom: PatchGeometry, beta: float,
) -> np.ndarray:
    """Gradient of :func:`encoding_error_value` in x (codes, clusters fixed).

    Equals 2 beta sum_i P_i^T (L P_i x - sum_l b_i at level 0), using the
    unitarity of the transforms to pull every layer's residual back to the
    patch domain.
    """
    backprop_total = coding.backprop_sum(0, codes, assign, model)
    return _gradient_from_backprop(
        x, backprop_total, model.layers, beta, patch_geom
    )


def transform_penalty_curvature(
    layers: int, beta: float, patch_geom: PatchGeometry,
) -> np.ndarray:
    """Exact diagonal Hessian 2 L beta sum_i P_i^T P_i as an image."""
    return 2.0 * beta * layers * overlap_counts(patch_geom)


def pwls_mcst(
    scan: WeightedScan, geometry: ScanGeometry, model: ModelBundle,
    config: ReconConfig, x0: np.ndarray,
) -> tuple[np.ndarray, ReconTrace]:
    """Reconstruct with the trained layered transform model as the penalty.

    Each outer iteration runs ``inner_iterations`` relaxed augmented-
    Lagrangian image steps with the codes fixed (all-zero on the first
    pass, penalty parameter restarted), then refreshes cluster assignments
    and sparse codes for all layers from the updated image.
    """
    if len(config.code_thresholds) != model.layers:
        raise ValueError(
            f"{len(config.code_thresholds)} code thresholds for "
            f"{model.layers} layers"
        )
    start = time.perf_counter()
    layers = model.layers
    patch_geom = PatchGeometry(
        geometry.image_size, geometry.image_size, model.patch_side
    )
    n_patches = patch_geom.patch_count
    d_data = sqs_diagonal(geometry, scan.weights)
    d_penalty = transform_penalty_curvature(layers, config.beta, patch_geom)

    x = np.maximum(np.asarray(x0, dtype=np.float64), 0.0)
    if x.shape != geometry.image_shape:
        raise ValueError(f"initial image shape {x.shape} does not match geometry")
    codes = [np.zeros((patch_geom.patch_dim, n_patches)) for _ in range(layers)]
    assign = np.zeros((layers, n_patches), dtype=np.int64)

    zeta, _ = _weighted_gradient(x, scan, geometry)
    trace = ReconTrace()
    for outer in range(config.outer_iterations):
        backprop_total = coding.backprop_sum(0, codes, assign, model)

        def penalty_gradient(img: np.ndarray) -> np.ndarray:
            return _gradient_from_backprop(
                img, backprop_total, layers, config.beta, patch_geom
            )

        x, zeta, data_value = _lalm_sweep(
            x, zeta, scan, geometry, d_data, d_penalty, penalty_gradient,
            config.alpha, config.inner_iterations,
        )
        residuals = coding.propagate_residuals(
            extract_patches(x, patch_geom), codes, assign, model
        )
        for l in range(layers):
            assign[l] = coding.assign_clusters_layer(l, residuals, codes, assign, model)
            coding.refresh_residuals(residuals, codes, assign, model, l)
        for l in range(layers):
            codes[l] = coding.sparse_code_layer(
                l, residuals, codes, assign, model, float(config.code_thresholds[l])
            )
            coding.refresh_residuals(residuals, codes, assign, model, l)
        penalty = transform_penalty_value(
            residuals, codes, assign, model, config.beta, config.code_thresholds
        )
        trace.record(outer, data_value, penalty)
    trace.elapsed_seconds = time.perf_counter() - start
    return x, trace


def huber_like(t: np.ndarray, delta: float) -> np.ndarray:
    """Potential delta^2 (sqrt(1 + (t/delta)^2) - 1); quadratic near zero."""
    u = t / delta
    return delta * delta * (np.sqrt(1.0 + u * u) - 1.0)


def huber_like_derivative(t: np.ndarray, delta: float) -> np.ndarray:
    u = t / delta
    return t / np.sqrt(1.0 + u * u)


_NEIGHBOR_OFFSETS = ((0, 1), (1, 0), (1, 1), (1, -1))


def _offset_slices(offset: tuple[int, int]):
    """Index pairs (base, shifted) covering every in-bounds neighbor pair."""
    dr, dc = offset
    rows = slice(None, -dr) if dr else slice(None)
    rows_s = slice(dr, None) if dr else slice(None)
    if dc > 0:
        cols, cols_s = slice(None, -dc), slice(dc, None)
    elif dc < 0:
        cols, cols_s = slice(-dc, None), slice(None, dc)
    else:
        cols = cols_s = slice(None)
    return (rows, cols), (rows_s, cols_s)


@dataclass(frozen=True)
class EpConfig:
    """Settings for the edge-preserving baseline reconstruction."""

    beta: float
    delta: float = 20.0
    iterations: int = 200
    alpha: float = 1.999

    def __post_init__(self) -> None:
        if self.beta <= 0 or self.delta <= 0:
            raise ValueError("beta and delta must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if not 1.0 <= self.alpha < 2.0:
            raise ValueError("alpha must lie in [1, 2)")


def ep_penalty_value(x: np.ndarray, kappa: np.ndarray, beta: float,
                     delta: float) -> float:
    """Pairwise penalty over the 8-neighborhood (each pair counted twice)."""
    total = 0.0
    for offset in _NEIGHBOR_OFFSETS:
        a, b = _offset_slices(offset)
        total += 2.0 * float(
            np.sum(kappa[a] * kappa[b] * huber_like(x[a] - x[b], delta))
        )
    return beta * total


def ep_penalty_gradient(x: np.ndarray, kappa: np.ndarray, beta: float,
                        delta: float) -> np.ndarray:
    grad = np.zeros_like(x)
    for offset in _NEIGHBOR_OFFSETS:
        a, b = _offset_slices(offset)
        g = kappa[a] * kappa[b] * huber_like_derivative(x[a] - x[b], delta)
        grad[a] += 2.0 * g
        grad[b] -= 2.0 * g
    return beta * grad


def ep_penalty_curvature(kappa: np.ndarray, beta: float) -> np.ndarray:
    """Diagonal majorizer of the pairwise penalty.

    The potential's curvature never exceeds one, and the pair coupling
    [[1, -1], [-1, 1]] is dominated by twice the identity, so each pair of
    weight 2 beta kappa kappa needs 4 beta kappa kappa on both diagonals.
    """
    diag = np.zeros_like(kappa)
    for offset in _NEIGHBOR_OFFSETS:
        a, b = _offset_slices(offset)
        kk = kappa[a] * kappa[b]
        diag[a] += 4.0 * kk
        diag[b] += 4.0 * kk
    return beta * diag


def statistical_kappa(geometry: ScanGeometry, weights: np.ndarray) -> np.ndarray:
    """Pixel weights sqrt((A^T W 1) / (A^T 1)) for uniform-resolution smoothing."""
    ones = np.ones(geometry.sinogram_shape)
    num = back_project(weights * ones, geometry)
    den = back_project(ones, geometry)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(den > 0, num / den, 0.0)
    return np.sqrt(np.clip(ratio, 0.0, None))


def pwls_ep(
    scan: WeightedScan, geometry: ScanGeometry, config: EpConfig,
    x0: np.ndarray, kappa: np.ndarray | None = None,
) -> tuple[np.ndarray, ReconTrace]:
    """Edge-preserving baseline; one continuous relaxed AL sweep."""
    start = time.perf_counter()
    x = np.maximum(np.asarray(x0, dtype=np.float64), 0.0)
    if x.shape != geometry.image_shape:
        raise ValueError(f"initial image shape {x.shape} does not match geometry")
    if kappa is None:
        kappa = np.ones(geometry.image_shape)
    d_data = sqs_diagonal(geometry, scan.weights)
    d_penalty = ep_penalty_curvature(kappa, config.beta)

    def penalty_gradient(img: np.ndarray) -> np.ndarray:
        return ep_penalty_gradient(img, kappa, config.beta, config.delta)

    trace = ReconTrace()

    def record(r: int, current: np.ndarray, data_value: float) -> None:
        trace.record(
            r, data_value,
            ep_penalty_value(current, kappa, config.beta, config.delta),
        )

    zeta, _ = _weighted_gradient(x, scan, geometry)
    x, _, _ = _lalm_sweep(
        x, zeta, scan, geometry, d_data, d_penalty, penalty_gradient,
        config.alpha, config.iterations, on_iteration=record,
    )
    trace.elapsed_seconds = time.perf_counter() - start
    return x, trace
