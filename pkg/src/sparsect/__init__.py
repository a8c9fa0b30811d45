"""Layered clustered sparsifying transforms for low-dose CT reconstruction.

The package covers the full pipeline: synthetic phantoms, a parallel-beam
scan simulator with photon-counting noise, block-coordinate training of a
multi-layer clustered transform model, penalized weighted-least-squares
reconstruction with that model (plus FBP and edge-preserving baselines),
and image quality metrics.
"""

from .config import ConfigError, ExperimentConfig, load_config, parse_config, render_config
from .ctscan import (
    NoiseModel,
    ScanGeometry,
    WeightedScan,
    back_project,
    counts_to_sinogram,
    counts_to_weights,
    fbp,
    forward_project,
    make_weighted_scan,
    simulate_counts,
    sqs_diagonal,
)
from .errors import FormatError, GeometryError, NumericalError, SparsectError
from .experiment import run_experiment
from .io import (
    read_image,
    read_sinogram,
    read_weights,
    write_image,
    write_sinogram,
    write_weights,
)
from .metrics import circular_roi, rmse, ssim
from .model import (
    ModelBundle,
    dct2_matrix,
    hard_threshold,
    load_model,
    random_orthogonal,
    save_model,
    unitarity_defect,
)
from .patches import PatchGeometry, aggregate_patches, extract_patches, overlap_counts
from .phantoms import disk, make_phantom, random_head, shepp_logan
from .recon import (
    EpConfig,
    ReconConfig,
    ReconTrace,
    pwls_ep,
    pwls_mcst,
    rho_schedule,
)
from .training import TrainConfig, TrainTrace, train

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "EpConfig",
    "ExperimentConfig",
    "FormatError",
    "GeometryError",
    "ModelBundle",
    "NoiseModel",
    "NumericalError",
    "PatchGeometry",
    "ReconConfig",
    "ReconTrace",
    "ScanGeometry",
    "SparsectError",
    "TrainConfig",
    "TrainTrace",
    "WeightedScan",
    "aggregate_patches",
    "back_project",
    "circular_roi",
    "counts_to_sinogram",
    "counts_to_weights",
    "dct2_matrix",
    "disk",
    "extract_patches",
    "fbp",
    "forward_project",
    "hard_threshold",
    "load_config",
    "load_model",
    "make_phantom",
    "make_weighted_scan",
    "overlap_counts",
    "parse_config",
    "pwls_ep",
    "pwls_mcst",
    "random_head",
    "random_orthogonal",
    "read_image",
    "read_sinogram",
    "read_weights",
    "render_config",
    "rho_schedule",
    "rmse",
    "run_experiment",
    "save_model",
    "shepp_logan",
    "simulate_counts",
    "sqs_diagonal",
    "ssim",
    "train",
    "unitarity_defect",
    "write_image",
    "write_sinogram",
    "write_weights",
]
