"""End-to-end pipeline: simulate, train, reconstruct, evaluate.

One master seed drives every random choice (noise realization, training
slices, training initialization) through fixed derived sub-seeds, so a
re-run with the same configuration reproduces every artifact byte for
byte.  Wall-clock timings are returned in memory but never written out.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import io as sio
from .config import ExperimentConfig, render_config
from .ctscan import fbp, make_weighted_scan
from .metrics import rmse, ssim
from .model import save_model
from .patches import PatchGeometry, extract_patches
from .phantoms import make_phantom, random_head
from .recon import pwls_ep, pwls_mcst, statistical_kappa
from .training import TrainConfig, train


def derive_seeds(master_seed: int, n_slices: int) -> dict:
    """Fixed sub-seed layout: noise, training, then one seed per slice."""
    state = np.random.SeedSequence(master_seed).generate_state(2 + n_slices)
    return {
        "noise": int(state[0]),
        "train": int(state[1]),
        "slices": [int(s) for s in state[2:]],
    }


def training_patches(config: ExperimentConfig) -> np.ndarray:
    """Patch columns drawn from seeded synthetic slices (test object excluded)."""
    seeds = derive_seeds(config.seed, config.training_slices)
    size = config.scan.image_size
    geom = PatchGeometry(size, size, config.patch_size, stride=config.train_stride)
    columns = [
        extract_patches(random_head(size, slice_seed), geom)
        for slice_seed in seeds["slices"]
    ]
    return np.hstack(columns)


def run_experiment(config: ExperimentConfig, out_dir) -> dict:
    """Run the full pipeline, writing all artifacts into ``out_dir``.

    Returns a dict with the reconstructions, metric values, and paths.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(render_config(config), encoding="utf-8")

    seeds = derive_seeds(config.seed, config.training_slices)
    geometry = config.scan
    truth = make_phantom(config.test_phantom, geometry.image_size, seed=config.seed)
    scan = make_weighted_scan(truth, geometry, config.noise, seeds["noise"])
    sio.write_image(out / "truth.img", truth)
    sio.write_sinogram(out / "scan.sin", scan.sinogram)
    sio.write_weights(out / "scan.wgt", scan.weights)

    patches = training_patches(config)
    train_config = TrainConfig(
        clusters_per_layer=config.train.clusters_per_layer,
        thresholds=config.train.thresholds,
        iterations=config.train.iterations,
        seed=seeds["train"],
    )
    model, train_trace = train(patches, train_config)
    save_model(out / "model.mcst", model)
    train_trace.save_csv(out / "train_trace.csv")

    fbp_image = fbp(scan.sinogram, geometry, cutoff=config.fbp_cutoff)
    sio.write_image(out / "fbp.img", fbp_image)
    x0 = np.maximum(fbp_image, 0.0)

    kappa = statistical_kappa(geometry, scan.weights)
    ep_image, ep_trace = pwls_ep(scan, geometry, config.ep, x0, kappa)
    sio.write_image(out / "ep.img", ep_image)
    ep_trace.save_csv(out / "ep_trace.csv")

    mcst_image, mcst_trace = pwls_mcst(scan, geometry, model, config.recon, x0)
    sio.write_image(out / "mcst.img", mcst_image)
    mcst_trace.save_csv(out / "mcst_trace.csv")

    metrics = {}
    for name, image in (("fbp", fbp_image), ("ep", ep_image), ("mcst", mcst_image)):
        metrics[name] = {
            "rmse": rmse(truth, image),
            "ssim": ssim(truth, image),
        }
    with open(out / "metrics.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("method,rmse,ssim\n")
        for name in ("fbp", "ep", "mcst"):
            fh.write(
                f"{name},{metrics[name]['rmse']!r},{metrics[name]['ssim']!r}\n"
            )

    return {
        "out_dir": out,
        "truth": truth,
        "scan": scan,
        "model": model,
        "train_trace": train_trace,
        "images": {"fbp": fbp_image, "ep": ep_image, "mcst": mcst_image},
        "traces": {"ep": ep_trace, "mcst": mcst_trace},
        "metrics": metrics,
    }
