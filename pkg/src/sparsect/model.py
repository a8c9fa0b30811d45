"""The layered transform model: container, building blocks and serialization.

A model is a stack of L layers; layer l holds K_l square unitary transforms
(one per patch cluster) and one sparsity threshold.  The model file starts
with magic ``MCST1``, then version, layer count, patch side and per-layer
cluster counts as unsigned 32-bit little-endian integers, the thresholds as
64-bit little-endian floats, and finally the transforms in layer-major,
cluster-major, row-major order as 64-bit little-endian floats.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, NumericalError

MODEL_MAGIC = b"MCST1"
MODEL_VERSION = 1

#: Largest accepted Frobenius defect of Omega @ Omega.T from the identity.
UNITARITY_TOL = 1e-8


def hard_threshold(values: np.ndarray, t: float) -> np.ndarray:
    """Zero every entry whose magnitude is strictly less than ``t``.

    Entries with magnitude exactly ``t`` are kept.
    """
    if t < 0:
        raise ValueError(f"threshold must be nonnegative, got {t}")
    values = np.asarray(values, dtype=np.float64)
    return np.where(np.abs(values) >= t, values, 0.0)


def dct2_matrix(n: int) -> np.ndarray:
    """Orthonormal 2-D DCT on vectorized square patches of n pixels.

    Built as the Kronecker square of the m-point orthonormal type-II DCT
    (m = sqrt(n)), matching row-major patch vectorization.
    """
    m = int(round(np.sqrt(n)))
    if m * m != n:
        raise ValueError(f"n must be a perfect square, got {n}")
    j = np.arange(m)
    k = np.arange(m)[:, None]
    d1 = np.cos(np.pi * (2 * j + 1) * k / (2 * m)) * np.sqrt(2.0 / m)
    d1[0] = np.sqrt(1.0 / m)
    return np.kron(d1, d1)


def random_orthogonal(n: int, seed) -> np.ndarray:
    """Seeded random orthogonal matrix (QR with positive-diagonal convention)."""
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def unitarity_defect(matrix: np.ndarray) -> float:
    """Frobenius norm of M @ M.T - I."""
    n = matrix.shape[0]
    return float(np.linalg.norm(matrix @ matrix.T - np.eye(n)))


@dataclass
class ModelBundle:
    """Learned transform stack.

    transforms[l] has shape (K_l, n, n); thresholds has length L.  The
    thresholds stored here are the ones the model was trained with; the
    reconstruction stage supplies its own.
    """

    transforms: list[np.ndarray]
    thresholds: np.ndarray
    patch_side: int
    format_version: int = MODEL_VERSION

    def __post_init__(self):
        self.transforms = [np.asarray(t, dtype=np.float64) for t in self.transforms]
        self.thresholds = np.asarray(self.thresholds, dtype=np.float64)

    @property
    def layers(self) -> int:
        return len(self.transforms)

    @property
    def clusters_per_layer(self) -> list[int]:
        return [bank.shape[0] for bank in self.transforms]

    @property
    def patch_dim(self) -> int:
        return self.patch_side * self.patch_side

    def validate(self, tol: float = UNITARITY_TOL) -> None:
        """Check structural consistency and the unitarity of every transform."""
        n = self.patch_dim
        if self.thresholds.shape != (self.layers,):
            raise FormatError(
                f"{self.layers} layers but {self.thresholds.size} thresholds"
            )
        if np.any(self.thresholds < 0):
            raise FormatError("thresholds must be nonnegative")
        for l, bank in enumerate(self.transforms):
            if bank.ndim != 3 or bank.shape[1:] != (n, n):
                raise FormatError(
                    f"layer {l}: transform bank shape {bank.shape}, expected (*, {n}, {n})"
                )
            for k in range(bank.shape[0]):
                defect = unitarity_defect(bank[k])
                if not np.isfinite(defect) or defect > tol:
                    raise NumericalError(
                        f"layer {l} cluster {k}: unitarity defect {defect:.3e} "
                        f"exceeds {tol:.1e}"
                    )

    def copy(self) -> "ModelBundle":
        return ModelBundle(
            [bank.copy() for bank in self.transforms],
            self.thresholds.copy(),
            self.patch_side,
            self.format_version,
        )


def save_model(path: str | os.PathLike, model: ModelBundle) -> None:
    model.validate()
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        header = [model.format_version, model.layers, model.patch_side]
        header += model.clusters_per_layer
        fh.write(np.asarray(header, dtype="<u4").tobytes())
        fh.write(np.asarray(model.thresholds, dtype="<f8").tobytes())
        for bank in model.transforms:
            fh.write(np.ascontiguousarray(bank, dtype="<f8").tobytes())


def load_model(path: str | os.PathLike) -> ModelBundle:
    with open(path, "rb") as fh:
        magic = fh.read(len(MODEL_MAGIC))
        if magic != MODEL_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        fixed = np.frombuffer(fh.read(12), dtype="<u4")
        if fixed.size != 3:
            raise FormatError(f"{path}: truncated header")
        version, layers, patch_side = (int(v) for v in fixed)
        if version != MODEL_VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        if layers < 1 or patch_side < 1:
            raise FormatError(f"{path}: invalid header ({layers} layers)")
        counts = np.frombuffer(fh.read(4 * layers), dtype="<u4")
        if counts.size != layers:
            raise FormatError(f"{path}: truncated cluster counts")
        thresholds = np.frombuffer(fh.read(8 * layers), dtype="<f8")
        if thresholds.size != layers:
            raise FormatError(f"{path}: truncated thresholds")
        n = patch_side * patch_side
        banks = []
        for k in counts:
            nbytes = 8 * int(k) * n * n
            raw = fh.read(nbytes)
            if len(raw) != nbytes:
                raise FormatError(f"{path}: truncated transforms")
            banks.append(
                np.frombuffer(raw, dtype="<f8").reshape(int(k), n, n).copy()
            )
    model = ModelBundle(banks, thresholds.copy(), patch_side, version)
    model.validate()
    return model
