"""Shared reference implementations used as oracles by several test modules."""

import numpy as np

from sparsect.coding import kmeans_init
from sparsect.model import dct2_matrix, random_orthogonal


def single_transform_reference(patches, eta, iterations):
    """Plain one-layer, one-cluster transform learning, written directly.

    Starts from the 2D DCT with zero codes, alternates hard-threshold coding
    with a Procrustes transform update, and records the objective after every
    sub-step in the same (cluster, code, transform) cadence as the full
    trainer, where the cluster step is a no-op.  Returns the objective list
    starting with the value at initialization.
    """
    x = np.asarray(patches, dtype=np.float64)
    n = x.shape[0]
    omega = dct2_matrix(n)
    z = np.zeros_like(x)

    def value():
        d = omega @ x - z
        return float(np.sum(d * d)) + eta * eta * np.count_nonzero(z)

    values = [value()]
    for _ in range(iterations):
        values.append(value())
        t = omega @ x
        z = np.where(np.abs(t) >= eta, t, 0.0)
        values.append(value())
        u, _, vt = np.linalg.svd(x @ z.T)
        omega = vt.T @ u.T
        values.append(value())
    return values


def chain_reference(patches, thresholds, iterations, seed):
    """Multi-layer learning with one transform per layer, written directly.

    No cluster machinery at all: plain arrays, explicit transposed-product
    accumulation for the deeper-layer pullbacks, and the same sub-step
    cadence and seeding layout as the full trainer restricted to one cluster
    everywhere.  Returns the recorded objective list.
    """
    x = np.asarray(patches, dtype=np.float64)
    n = x.shape[0]
    n_layers = len(thresholds)
    root = np.random.SeedSequence(seed)
    _, transforms_seed, _ = root.spawn(3)
    rng = np.random.default_rng(transforms_seed)
    omegas = [dct2_matrix(n)]
    omegas += [random_orthogonal(n, rng) for _ in range(n_layers - 1)]
    z = [np.zeros_like(x) for _ in range(n_layers)]

    def residual(layer):
        r = x
        for j in range(layer):
            r = omegas[j] @ r - z[j]
        return r

    def pullback_sum(level):
        # One accumulated vector per deeper source layer; each source pulls
        # back its own encoding target through every transform in between.
        total = np.zeros_like(x)
        for s in range(level, n_layers):
            acc = np.zeros_like(x)
            for j in range(s, level - 1, -1):
                acc = omegas[j].T @ (z[j] + acc)
            total += acc
        return total

    def value():
        total = 0.0
        for j in range(n_layers):
            d = omegas[j] @ residual(j) - z[j]
            total += float(np.sum(d * d))
            total += float(thresholds[j]) ** 2 * np.count_nonzero(z[j])
        return total

    values = [value()]
    for _ in range(iterations):
        for l in range(n_layers):
            m = n_layers - l
            r = residual(l)
            mean_pull = pullback_sum(l + 1) / m
            values.append(value())
            target = omegas[l] @ r - (mean_pull if m > 1 else 0.0)
            t = thresholds[l] / np.sqrt(m)
            z[l] = np.where(np.abs(target) >= t, target, 0.0)
            values.append(value())
            goal = z[l] + (mean_pull if m > 1 else 0.0)
            u, _, vt = np.linalg.svd(r @ goal.T)
            omegas[l] = vt.T @ u.T
            values.append(value())
    return values


def clustered_flat_reference(patches, n_clusters, eta, iterations, seed):
    """Single-layer clustered transform learning, written directly.

    One k-means-seeded assignment row, per-cluster hard-threshold coding and
    Procrustes updates, ties keeping the incumbent cluster.  No residual
    recursion of any kind.  Returns the recorded objective list.
    """
    x = np.asarray(patches, dtype=np.float64)
    n, n_patches = x.shape
    tie_rel = 1e-10
    root = np.random.SeedSequence(seed)
    kmeans_seed, _, _ = root.spawn(3)
    omegas = [dct2_matrix(n) for _ in range(n_clusters)]
    assign = kmeans_init(x, n_clusters, kmeans_seed)
    z = np.zeros_like(x)

    def value():
        total = eta * eta * np.count_nonzero(z)
        for k in range(n_clusters):
            idx = np.flatnonzero(assign == k)
            d = omegas[k] @ x[:, idx] - z[:, idx]
            total += float(np.sum(d * d))
        return float(total)

    values = [value()]
    for _ in range(iterations):
        costs = np.stack(
            [np.sum((w @ x - z) ** 2, axis=0) for w in omegas]
        )
        best = costs.min(axis=0)
        inc = costs[assign, np.arange(n_patches)]
        keep = inc <= best * (1.0 + tie_rel)
        assign = np.where(keep, assign, costs.argmin(axis=0)).astype(np.int64)
        values.append(value())
        for k in range(n_clusters):
            idx = np.flatnonzero(assign == k)
            t = omegas[k] @ x[:, idx]
            z[:, idx] = np.where(np.abs(t) >= eta, t, 0.0)
        values.append(value())
        for k in range(n_clusters):
            idx = np.flatnonzero(assign == k)
            if idx.size == 0:
                continue
            u, _, vt = np.linalg.svd(x[:, idx] @ z[:, idx].T)
            omegas[k] = vt.T @ u.T
        values.append(value())
    return values
