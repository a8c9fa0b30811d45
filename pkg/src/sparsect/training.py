"""Block-coordinate training of the layered clustered transform model."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import coding
from .model import ModelBundle, dct2_matrix, random_orthogonal


@dataclass(frozen=True)
class TrainConfig:
    """Settings for one training run.

    ``clusters_per_layer`` fixes the depth; ``thresholds`` must match it in
    length.  ``seed`` drives clustering init, random deep transforms, and the
    random deep-layer assignments.
    """

    clusters_per_layer: tuple[int, ...]
    thresholds: tuple[float, ...]
    iterations: int = 50
    seed: int = 0

    def __post_init__(self) -> None:
        if len(self.clusters_per_layer) == 0:
            raise ValueError("need at least one layer")
        if any(int(k) < 1 for k in self.clusters_per_layer):
            raise ValueError("cluster counts must be positive")
        if len(self.thresholds) != len(self.clusters_per_layer):
            raise ValueError(
                f"{len(self.thresholds)} thresholds for "
                f"{len(self.clusters_per_layer)} layers"
            )
        if any(t < 0 for t in self.thresholds):
            raise ValueError("thresholds must be nonnegative")
        if int(self.iterations) < 1:
            raise ValueError("iterations must be positive")

    @property
    def layers(self) -> int:
        return len(self.clusters_per_layer)


@dataclass
class TrainTrace:
    """Objective values recorded after every block-coordinate sub-step.

    Rows are (iteration, layer, step, objective) with iteration -1 marking
    the value at initialization.  Wall-clock time is kept here for reporting
    but never written to disk, so saved traces depend only on the data,
    config, and seed.
    """

    rows: list[tuple[int, int, str, float]] = field(default_factory=list)
    elapsed_seconds: float = 0.0

    def record(self, iteration: int, layer: int, step: str, objective: float) -> None:
        self.rows.append((iteration, layer, step, float(objective)))

    @property
    def objectives(self) -> np.ndarray:
        return np.array([row[3] for row in self.rows])

    def save_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("iteration,layer,step,objective\n")
            for iteration, layer, step, objective in self.rows:
                fh.write(f"{iteration},{layer},{step},{objective!r}\n")


def init_model(patch_dim: int, config: TrainConfig, seed_sequence) -> ModelBundle:
    """Starting transforms: a 2D DCT bank at layer one, random deeper banks."""
    rng = np.random.default_rng(seed_sequence)
    transforms = []
    for l, n_clusters in enumerate(config.clusters_per_layer):
        if l == 0:
            base = dct2_matrix(patch_dim)
            bank = np.broadcast_to(base, (n_clusters,) + base.shape).copy()
        else:
            bank = np.stack(
                [random_orthogonal(patch_dim, rng) for _ in range(n_clusters)]
            )
        transforms.append(bank)
    return ModelBundle(
        transforms=transforms,
        thresholds=np.asarray(config.thresholds, dtype=np.float64),
        patch_side=int(round(np.sqrt(patch_dim))),
    )


def train(patches: np.ndarray, config: TrainConfig) -> tuple[ModelBundle, TrainTrace]:
    """Fit transforms, codes, and cluster assignments to the patch columns.

    Each outer iteration sweeps the layers shallow to deep; per layer the
    cluster assignment, sparse code, and transform sub-steps run in that
    order, each followed by re-propagation of the deeper residuals.  Only
    the model is returned; codes and assignments are training by-products.
    """
    start = time.perf_counter()
    x = np.asarray(patches, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"patches must be 2D (dim, count), got shape {x.shape}")
    n, n_patches = x.shape
    side = int(round(np.sqrt(n)))
    if side * side != n:
        raise ValueError(f"patch dimension {n} is not a perfect square")

    root = np.random.SeedSequence(config.seed)
    kmeans_seed, transforms_seed, assign_seed = root.spawn(3)
    model = init_model(n, config, transforms_seed)
    layers = config.layers

    assign = np.zeros((layers, n_patches), dtype=np.int64)
    assign[0] = coding.kmeans_init(x, config.clusters_per_layer[0], kmeans_seed)
    assign_rng = np.random.default_rng(assign_seed)
    for l in range(1, layers):
        assign[l] = assign_rng.integers(
            config.clusters_per_layer[l], size=n_patches, dtype=np.int64
        )
    codes = [np.zeros((n, n_patches)) for _ in range(layers)]
    thresholds = np.asarray(config.thresholds, dtype=np.float64)

    trace = TrainTrace()
    residuals = coding.propagate_residuals(x, codes, assign, model)
    penalties = np.zeros(layers)

    def objective() -> float:
        # residuals[s] already holds the encoding error of layer s - 1 and
        # penalties[] tracks the counting terms, so only the deepest layer
        # needs a transform apply.
        total = float(penalties.sum())
        for s in range(1, layers):
            total += float(np.einsum("ij,ij->", residuals[s], residuals[s]))
        d = coding.apply_bank(model, layers - 1, residuals[-1], assign[-1])
        d -= codes[-1]
        return total + float(np.einsum("ij,ij->", d, d))

    trace.record(-1, -1, "init", objective())
    for iteration in range(config.iterations):
        for l in range(layers):
            # Everything below depends on deeper layers only, so one
            # back-propagation serves all three sub-steps of this layer.
            components = coding.backprop_components(l + 1, codes, assign, model)
            m = layers - l
            correction = None
            if components:
                correction = components[0].copy()
                for comp in components[1:]:
                    correction += comp
                correction /= m

            assign[l], chosen_cost = coding.assign_clusters_layer(
                l, residuals, codes, assign, model,
                components=components, return_cost=True,
            )
            coding.refresh_residuals(residuals, codes, assign, model, l)
            # Layers above l are untouched, so their encoding residuals are
            # the stored deeper residuals; the rest is the assignment cost.
            upstream = sum(
                float(np.einsum("ij,ij->", residuals[s], residuals[s]))
                for s in range(1, l + 1)
            )
            trace.record(
                iteration, l, "cluster",
                upstream + chosen_cost + float(penalties.sum()),
            )

            codes[l] = coding.sparse_code_layer(
                l, residuals, codes, assign, model, float(thresholds[l]),
                correction=correction,
            )
            penalties[l] = float(thresholds[l]) ** 2 * np.count_nonzero(codes[l])
            coding.refresh_residuals(residuals, codes, assign, model, l)
            trace.record(iteration, l, "code", objective())

            model.transforms[l] = coding.transform_update_layer(
                l, residuals, codes, assign, model, correction=correction
            )
            coding.refresh_residuals(residuals, codes, assign, model, l)
            trace.record(iteration, l, "transform", objective())

    trace.elapsed_seconds = time.perf_counter() - start
    return model, trace
