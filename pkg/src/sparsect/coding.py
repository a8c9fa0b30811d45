"""Block-coordinate machinery for the layered clustered transform model.

State is carried in three aligned containers:

* residuals: list of L arrays (n, N); residuals[0] holds the raw patch
  columns and residuals[l+1][:, i] = Omega_{l,k(i,l)} residuals[l][:, i]
  - codes[l][:, i].
* codes: list of L arrays (n, N) of sparse codes.
* assign: (L, N) integer array of cluster indices, one row per layer.

Layer indices are 0-based.  Back-propagation "levels" count applied
transforms: level 0 is the raw patch domain, level L the deepest residual,
so the vector at level p accumulated from layers p+1..q applies the
transposed transforms of those layers.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericalError
from .model import ModelBundle, hard_threshold

#: Relative slack used to detect cost ties during cluster assignment.  Exact
#: ties (all-zero codes make every unitary candidate equivalent) land within
#: float rounding of each other; keeping the incumbent inside this band
#: preserves the initialization instead of collapsing to rounding noise.
ASSIGN_TIE_REL = 1e-10


def apply_bank(
    model: ModelBundle, layer: int, cols: np.ndarray, assign_row: np.ndarray,
    transpose: bool = False,
) -> np.ndarray:
    """Apply the layer's per-cluster transforms column-wise."""
    bank = model.transforms[layer]
    if bank.shape[0] == 1:
        mat = bank[0].T if transpose else bank[0]
        return mat @ cols
    if np.any(assign_row < 0) or np.any(assign_row >= bank.shape[0]):
        raise IndexError(f"cluster index out of range for layer {layer}")
    out = np.empty_like(cols, dtype=np.float64)
    for k in range(bank.shape[0]):
        idx = np.flatnonzero(assign_row == k)
        if idx.size:
            mat = bank[k].T if transpose else bank[k]
            out[:, idx] = mat @ cols[:, idx]
    return out


def propagate_residuals(
    r1: np.ndarray, codes: list[np.ndarray], assign: np.ndarray, model: ModelBundle
) -> list[np.ndarray]:
    """Rebuild the full residual stack from the raw patches."""
    residuals = [np.asarray(r1, dtype=np.float64)]
    for l in range(model.layers - 1):
        residuals.append(apply_bank(model, l, residuals[l], assign[l]) - codes[l])
    return residuals


def refresh_residuals(
    residuals: list[np.ndarray], codes: list[np.ndarray], assign: np.ndarray,
    model: ModelBundle, from_layer: int,
) -> None:
    """Recompute residuals deeper than ``from_layer`` in place.

    Cheaper than a full rebuild when only layer ``from_layer`` state changed;
    shallower entries are untouched.
    """
    for l in range(from_layer, model.layers - 1):
        residuals[l + 1] = apply_bank(model, l, residuals[l], assign[l]) - codes[l]


def objective_from_residuals(
    residuals: list[np.ndarray], codes: list[np.ndarray], assign: np.ndarray,
    model: ModelBundle, thresholds: np.ndarray,
) -> float:
    """Training objective evaluated on an already-consistent residual stack.

    Uses the recursion directly: the layer-l encoding residual equals the
    layer l+1 residual, so only the deepest layer needs a transform apply.
    Agrees with :func:`training_objective` up to rounding.
    """
    last = model.layers - 1
    total = 0.0
    for l in range(last):
        total += float(np.sum(residuals[l + 1] * residuals[l + 1]))
    d = apply_bank(model, last, residuals[last], assign[last]) - codes[last]
    total += float(np.sum(d * d))
    for l in range(model.layers):
        total += float(thresholds[l]) ** 2 * np.count_nonzero(codes[l])
    return total


def backprop_matrix(
    p: int, q: int, codes: list[np.ndarray], assign: np.ndarray, model: ModelBundle
) -> np.ndarray:
    """Accumulated transposed-transform products of codes from layers p+1..q.

    Evaluates sum_{s=p+1}^{q} (prod_{m=p+1}^{s} Omega_m^T) z_s for every
    patch at once via the recursion b = Omega_m^T (z_m + b), m = q..p+1
    (layers numbered from 1 here, matching the level convention).
    """
    if not 0 <= p < q <= model.layers:
        raise ValueError(f"need 0 <= p < q <= {model.layers}, got p={p}, q={q}")
    acc = np.zeros_like(codes[q - 1], dtype=np.float64)
    for m in range(q, p, -1):
        acc = apply_bank(model, m - 1, codes[m - 1] + acc, assign[m - 1], transpose=True)
    return acc


def backprop_vector(
    i: int, p: int, q: int, codes: list[np.ndarray], assign: np.ndarray,
    model: ModelBundle,
) -> np.ndarray:
    """Single-patch version of :func:`backprop_matrix`."""
    if not 0 <= p < q <= model.layers:
        raise ValueError(f"need 0 <= p < q <= {model.layers}, got p={p}, q={q}")
    if not 0 <= i < codes[0].shape[1]:
        raise IndexError(f"patch index {i} out of range")
    acc = np.zeros(codes[0].shape[0])
    for m in range(q, p, -1):
        k = int(assign[m - 1, i])
        acc = model.transforms[m - 1][k].T @ (codes[m - 1][:, i] + acc)
    return acc


def backprop_components(
    level: int, codes: list[np.ndarray], assign: np.ndarray, model: ModelBundle
) -> list[np.ndarray]:
    """Back-propagation matrices from each layer deeper than ``level``."""
    return [
        backprop_matrix(level, q, codes, assign, model)
        for q in range(level + 1, model.layers + 1)
    ]


def backprop_sum(
    level: int, codes: list[np.ndarray], assign: np.ndarray, model: ModelBundle
) -> np.ndarray:
    """Sum of back-propagation matrices from every layer deeper than ``level``."""
    total = np.zeros_like(codes[0], dtype=np.float64)
    for component in backprop_components(level, codes, assign, model):
        total += component
    return total


def encoding_residual_norm(
    i: int, s: int, residuals: list[np.ndarray], codes: list[np.ndarray],
    assign: np.ndarray, model: ModelBundle, via_layer: int | None = None,
) -> float:
    """Norm of the layer-s encoding residual of patch i.

    With ``via_layer=l`` (l < s) the same quantity is evaluated in layer-l
    coordinates through the back-propagation vector; both paths agree up to
    rounding because the transforms are unitary.
    """
    if via_layer is None:
        k = int(assign[s, i])
        d = model.transforms[s][k] @ residuals[s][:, i] - codes[s][:, i]
        return float(np.linalg.norm(d))
    l = via_layer
    if not 0 <= l < s:
        raise ValueError(f"via_layer must lie in [0, {s}), got {l}")
    b = backprop_vector(i, l + 1, s + 1, codes, assign, model)
    k = int(assign[l, i])
    d = model.transforms[l][k] @ residuals[l][:, i] - codes[l][:, i] - b
    return float(np.linalg.norm(d))


def backprop_mean(
    l: int, codes: list[np.ndarray], assign: np.ndarray, model: ModelBundle
) -> np.ndarray | None:
    """Deeper-layer back-propagation sum at level l+1, divided by L - l.

    This correction term appears in both the coding and transform updates of
    layer l and depends only on deeper layers, so callers sweeping one layer
    can compute it once.  None when layer l is the deepest.
    """
    m = model.layers - l
    if m == 1:
        return None
    return backprop_sum(l + 1, codes, assign, model) / m


def sparse_code_layer(
    l: int, residuals: list[np.ndarray], codes: list[np.ndarray],
    assign: np.ndarray, model: ModelBundle, eta: float,
    correction: np.ndarray | None = None,
) -> np.ndarray:
    """Closed-form minimizer of the layer-l coding subproblem.

    The transformed residual is pulled toward the mean of the deeper-layer
    back-propagation targets and hard-thresholded at eta/sqrt(m), where m
    counts the layers from l to the deepest one.  Pass ``correction`` to
    reuse a precomputed :func:`backprop_mean`.  Deeper residuals must be
    re-propagated by the caller afterwards.
    """
    m = model.layers - l
    target = apply_bank(model, l, residuals[l], assign[l])
    if m > 1:
        if correction is None:
            correction = backprop_mean(l, codes, assign, model)
        target = target - correction
    return hard_threshold(target, eta / np.sqrt(m))


def assign_clusters_layer(
    l: int, residuals: list[np.ndarray], codes: list[np.ndarray],
    assign: np.ndarray, model: ModelBundle,
    components: list[np.ndarray] | None = None, return_cost: bool = False,
):
    """Per-patch cluster choice at layer l with codes and deeper layers fixed.

    Each candidate's cost is its own encoding residual plus the re-propagated
    encoding residuals of every deeper layer.  Because deeper transforms are
    unitary, the downstream part collapses to a norm expansion around the
    candidate residual v: cost = (L-l) ||v||^2 - 2 <v, sum_q b_q> +
    sum_q ||b_q||^2 with b_q the level-(l+1) back-propagation vectors, so
    only one transform apply per candidate is needed.  Unitarity of the
    candidates themselves collapses this further to
    cost = c - 2 <W_k r, m z + sum_q b_q> with a candidate-independent c,
    one stacked matrix product and one inner product per candidate.  The
    sparsity penalty does not depend on the candidate and is omitted from
    the comparison.  Ties keep the incumbent assignment.

    With ``return_cost`` the summed chosen costs are returned as well (the
    deeper-layer part of the objective, before the sparsity penalty).
    """
    n_clusters = model.clusters_per_layer[l]
    incumbent = np.asarray(assign[l], dtype=np.int64)
    n_patches = residuals[0].shape[1]
    if n_clusters == 1 and not return_cost:
        return incumbent.copy()
    if components is None:
        components = backprop_components(l + 1, codes, assign, model)
    m = model.layers - l
    pull = m * codes[l]
    const = m * (
        np.einsum("ij,ij->j", residuals[l], residuals[l])
        + np.einsum("ij,ij->j", codes[l], codes[l])
    )
    if components:
        b_total = components[0].copy()
        for comp in components[1:]:
            b_total += comp
        for comp in components:
            const += np.einsum("ij,ij->j", comp, comp)
        const += 2.0 * np.einsum("ij,ij->j", codes[l], b_total)
        pull = pull + b_total
    n = residuals[l].shape[0]
    stacked = model.transforms[l].reshape(n_clusters * n, n) @ residuals[l]
    scores = np.einsum(
        "kij,ij->kj", stacked.reshape(n_clusters, n, n_patches), pull
    )
    costs = const[np.newaxis, :] - 2.0 * scores
    best = costs.min(axis=0)
    choice = costs.argmin(axis=0)
    inc_cost = costs[incumbent, np.arange(n_patches)]
    keep = inc_cost <= best * (1.0 + ASSIGN_TIE_REL)
    new_assign = np.where(keep, incumbent, choice).astype(np.int64)
    if return_cost:
        chosen = costs[new_assign, np.arange(n_patches)]
        return new_assign, float(chosen.sum())
    return new_assign


def transform_update_layer(
    l: int, residuals: list[np.ndarray], codes: list[np.ndarray],
    assign: np.ndarray, model: ModelBundle,
    correction: np.ndarray | None = None,
) -> np.ndarray:
    """Procrustes update of every cluster transform at layer l.

    For each cluster the cross matrix between its residual columns and the
    back-propagation-corrected code targets is factored by SVD, and the
    product V U^T is the unitary minimizer.  Empty clusters keep their
    previous transform.  Pass ``correction`` to reuse a precomputed
    :func:`backprop_mean`.
    """
    m = model.layers - l
    bank = model.transforms[l]
    new_bank = bank.copy()
    extra = correction
    if m > 1 and extra is None:
        extra = backprop_mean(l, codes, assign, model)
    for k in range(bank.shape[0]):
        idx = np.flatnonzero(assign[l] == k)
        if idx.size == 0:
            continue
        target = codes[l][:, idx]
        if extra is not None:
            target = target + extra[:, idx]
        cross = residuals[l][:, idx] @ target.T
        if not np.all(np.isfinite(cross)):
            raise NumericalError(
                f"non-finite cross matrix in transform update (layer {l}, cluster {k})"
            )
        u, _, vt = np.linalg.svd(cross)
        new_bank[k] = vt.T @ u.T
    return new_bank


def training_objective(
    r1: np.ndarray, codes: list[np.ndarray], assign: np.ndarray,
    model: ModelBundle, thresholds: np.ndarray,
) -> float:
    """Sum over layers of squared encoding residuals plus the sparsity penalty.

    Residuals are re-propagated from the raw patches, so the value reflects
    the stored codes and assignments exactly.
    """
    residuals = propagate_residuals(r1, codes, assign, model)
    total = 0.0
    for l in range(model.layers):
        d = apply_bank(model, l, residuals[l], assign[l]) - codes[l]
        total += float(np.sum(d * d))
        total += float(thresholds[l]) ** 2 * np.count_nonzero(codes[l])
    return total


def kmeans_init(
    patches: np.ndarray, n_clusters: int, seed, max_iters: int = 100
) -> np.ndarray:
    """Seeded Lloyd clustering of raw patch columns.

    The first center is a random patch and the rest are chosen farthest-first;
    clusters that empty out are re-seeded with the patch farthest from its
    assigned center, so every cluster stays nonempty.
    """
    x = np.asarray(patches, dtype=np.float64)
    n_patches = x.shape[1]
    if n_clusters < 1:
        raise ValueError("need at least one cluster")
    if n_clusters > n_patches:
        raise ValueError(f"{n_clusters} clusters but only {n_patches} patches")
    rng = np.random.default_rng(seed)
    sq = np.einsum("ij,ij->j", x, x)
    centers = np.empty((n_clusters, x.shape[0]))
    centers[0] = x[:, int(rng.integers(n_patches))]
    d2 = np.maximum(sq - 2.0 * centers[0] @ x + centers[0] @ centers[0], 0.0)
    for k in range(1, n_clusters):
        centers[k] = x[:, int(np.argmax(d2))]
        cand = np.maximum(sq - 2.0 * centers[k] @ x + centers[k] @ centers[k], 0.0)
        np.minimum(d2, cand, out=d2)
    assign = np.zeros(n_patches, dtype=np.int64)
    for iteration in range(max_iters):
        dist = (
            sq[None, :]
            - 2.0 * centers @ x
            + np.einsum("ij,ij->i", centers, centers)[:, None]
        )
        new_assign = np.argmin(dist, axis=0)
        for k in range(n_clusters):
            if not np.any(new_assign == k):
                far = int(np.argmax(dist[new_assign, np.arange(n_patches)]))
                new_assign[far] = k
        if iteration > 0 and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for k in range(n_clusters):
            centers[k] = x[:, assign == k].mean(axis=1)
    return assign
