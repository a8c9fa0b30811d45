"""Command-line entry point.

Subcommands: phantom, simulate, train, reconstruct, evaluate, export-png,
run-experiment.  Exit codes: 0 on success, 1 on usage or configuration
errors, 2 on runtime or numerical errors.  All error messages go to
standard error prefixed with ``error:``.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io as sio
from .config import ConfigError, load_config, replace_seed
from .ctscan import NoiseModel, ScanGeometry, WeightedScan, fbp, make_weighted_scan
from .errors import SparsectError
from .experiment import run_experiment
from .metrics import rmse, ssim
from .model import load_model, save_model
from .patches import PatchGeometry, extract_patches
from .phantoms import make_phantom
from .recon import EpConfig, ReconConfig, pwls_ep, pwls_mcst, statistical_kappa
from .training import TrainConfig, train


class _UsageError(Exception):
    """Bad argument combinations detected after parsing."""


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage failures exit with code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


def _int_list(text: str) -> tuple[int, ...]:
    try:
        parts = tuple(int(p.strip()) for p in text.split(",") if p.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not parts:
        raise argparse.ArgumentTypeError("empty list")
    return parts


def _float_list(text: str) -> tuple[float, ...]:
    try:
        parts = tuple(float(p.strip()) for p in text.split(",") if p.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not parts:
        raise argparse.ArgumentTypeError("empty list")
    return parts


def _window(text: str) -> tuple[float, float]:
    parts = _float_list(text)
    if len(parts) != 2 or parts[1] <= parts[0]:
        raise argparse.ArgumentTypeError(
            f"expected lo,hi with hi > lo, got {text!r}"
        )
    return parts[0], parts[1]


def _add_geometry_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--size", type=int, default=128,
                        help="image side length in pixels")
    parser.add_argument("--pixel-size", type=float, default=2.0,
                        help="pixel side length in mm")
    parser.add_argument("--det-spacing", type=float, default=2.0,
                        help="detector bin spacing in mm")


def _cmd_phantom(args) -> int:
    image = make_phantom(args.name, args.size, seed=args.seed)
    sio.write_image(args.out, image)
    return 0


def _cmd_simulate(args) -> int:
    geometry = ScanGeometry(
        image_size=args.size, pixel_size=args.pixel_size,
        n_views=args.views, n_bins=args.dets, det_spacing=args.det_spacing,
    )
    noise = NoiseModel(
        incident_photons=args.i0,
        electronic_sigma=float(np.sqrt(args.sigma2)),
        attenuation_per_unit=args.att,
    )
    image = make_phantom(args.phantom, args.size, seed=args.phantom_seed)
    scan = make_weighted_scan(image, geometry, noise, args.seed)
    prefix = Path(args.out_prefix)
    sio.write_image(prefix.parent / (prefix.name + ".img"), image)
    sio.write_sinogram(prefix.parent / (prefix.name + ".sin"), scan.sinogram)
    sio.write_weights(prefix.parent / (prefix.name + ".wgt"), scan.weights)
    return 0


def _cmd_train(args) -> int:
    if args.layers != len(args.clusters):
        raise _UsageError(
            f"--layers {args.layers} does not match {len(args.clusters)} "
            "cluster counts"
        )
    if len(args.eta) != len(args.clusters):
        raise _UsageError(
            f"{len(args.eta)} thresholds for {len(args.clusters)} layers"
        )
    columns = []
    for path in args.patches:
        image = sio.read_image(path)
        geom = PatchGeometry(
            image.shape[0], image.shape[1], args.patch_size, stride=args.stride
        )
        columns.append(extract_patches(image, geom))
    config = TrainConfig(
        clusters_per_layer=args.clusters, thresholds=args.eta,
        iterations=args.iters, seed=args.seed,
    )
    model, trace = train(np.hstack(columns), config)
    save_model(args.out, model)
    if args.trace:
        trace.save_csv(args.trace)
    return 0


def _cmd_reconstruct(args) -> int:
    sinogram = sio.read_sinogram(args.sinogram)
    geometry = ScanGeometry(
        image_size=args.size, pixel_size=args.pixel_size,
        n_views=sinogram.shape[0], n_bins=sinogram.shape[1],
        det_spacing=args.det_spacing,
    )
    if args.method == "fbp":
        image = fbp(sinogram, geometry, cutoff=args.cutoff)
        sio.write_image(args.out, image)
        return 0

    if not args.weights:
        raise _UsageError(f"--weights is required for method {args.method!r}")
    weights = sio.read_weights(args.weights)
    if weights.shape != sinogram.shape:
        raise SparsectError(
            f"weights shape {weights.shape} does not match sinogram "
            f"{sinogram.shape}"
        )
    scan = WeightedScan(sinogram=sinogram, weights=weights, counts=None)
    if args.init == "fbp":
        x0 = np.maximum(fbp(sinogram, geometry, cutoff=args.cutoff), 0.0)
    else:
        x0 = sio.read_image(args.init)

    if args.method == "ep":
        config = EpConfig(
            beta=args.ep_beta, delta=args.delta,
            iterations=args.iters, alpha=args.alpha,
        )
        kappa = statistical_kappa(geometry, weights)
        image, trace = pwls_ep(scan, geometry, config, x0, kappa)
    else:
        if not args.model:
            raise _UsageError("--model is required for method 'mcst'")
        model = load_model(args.model)
        if len(args.gamma) != model.layers:
            raise _UsageError(
                f"{len(args.gamma)} gamma values for a {model.layers}-layer model"
            )
        config = ReconConfig(
            beta=args.beta, code_thresholds=args.gamma,
            outer_iterations=args.outer, inner_iterations=args.inner,
            alpha=args.alpha,
        )
        image, trace = pwls_mcst(scan, geometry, model, config, x0)
    sio.write_image(args.out, image)
    if args.trace:
        trace.save_csv(args.trace)
    return 0


def _cmd_evaluate(args) -> int:
    recon = sio.read_image(args.recon)
    truth = sio.read_image(args.truth)
    wanted = args.metrics
    lines = ["metric,value"]
    for name in wanted:
        if name == "rmse":
            roi = None if args.roi_circle else np.ones(truth.shape, dtype=bool)
            value = rmse(truth, recon, roi=roi)
        elif name == "ssim":
            value = ssim(truth, recon)
        else:
            raise _UsageError(f"unknown metric {name!r}; choose rmse or ssim")
        lines.append(f"{name},{value!r}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_export_png(args) -> int:
    from PIL import Image

    image = sio.read_image(args.input)
    lo, hi = args.window
    scaled = np.clip((image - lo) / (hi - lo), 0.0, 1.0)
    data = np.round(scaled * 255.0).astype(np.uint8)
    Image.fromarray(data, mode="L").save(args.out)
    return 0


def _cmd_run_experiment(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = replace_seed(config, args.seed)
    result = run_experiment(config, args.out_dir)
    for method in ("fbp", "ep", "mcst"):
        m = result["metrics"][method]
        sys.stdout.write(f"{method},{m['rmse']!r},{m['ssim']!r}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="sparsect",
        description="Layered clustered sparsifying transforms for low-dose "
                    "CT: simulation, training, reconstruction, evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", parents=[], help="write a synthetic test image",
                       description="Generate a named phantom image file.")
    p.add_argument("--name", required=True,
                   help="phantom name: shepp-logan, disk, or random-head")
    p.add_argument("--size", type=int, default=128, help="image side length")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for the random phantoms")
    p.add_argument("--out", required=True, help="output image path")
    p.set_defaults(func=_cmd_phantom)

    p = sub.add_parser("simulate", help="simulate a noisy scan of a phantom",
                       description="Forward-project a phantom and add "
                                   "photon-counting noise.")
    p.add_argument("--phantom", required=True, help="phantom name")
    p.add_argument("--views", type=int, default=180, help="number of view angles")
    p.add_argument("--dets", type=int, default=185, help="number of detector bins")
    p.add_argument("--i0", type=float, default=1.0e4,
                   help="incident photons per ray")
    p.add_argument("--sigma2", type=float, default=25.0,
                   help="electronic noise variance in counts^2")
    p.add_argument("--att", type=float, default=2.0e-5,
                   help="optical depth per unit*mm of line integral")
    p.add_argument("--seed", type=int, default=0, help="noise seed")
    p.add_argument("--phantom-seed", type=int, default=0,
                   help="seed for random phantoms")
    p.add_argument("--out-prefix", required=True,
                   help="prefix for .img/.sin/.wgt outputs")
    _add_geometry_flags(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("train", help="fit the layered transform model",
                       description="Extract patches from images and train "
                                   "the clustered multi-layer model.")
    p.add_argument("--patches", nargs="+", required=True,
                   help="image files supplying training patches")
    p.add_argument("--layers", type=int, required=True, help="number of layers")
    p.add_argument("--clusters", type=_int_list, required=True,
                   help="comma-separated clusters per layer, e.g. 5,5")
    p.add_argument("--eta", type=_float_list, required=True,
                   help="comma-separated thresholds per layer, e.g. 80,60")
    p.add_argument("--iters", type=int, default=50, help="training iterations")
    p.add_argument("--seed", type=int, default=0, help="training seed")
    p.add_argument("--patch-size", type=int, default=8, help="patch side length")
    p.add_argument("--stride", type=int, default=1, help="patch extraction stride")
    p.add_argument("--out", required=True, help="output model path")
    p.add_argument("--trace", default=None, help="optional objective CSV path")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("reconstruct", help="reconstruct an image from a scan",
                       description="Penalized weighted-least-squares or FBP "
                                   "reconstruction from sinogram and weights.")
    p.add_argument("--sinogram", required=True, help="sinogram file")
    p.add_argument("--weights", default=None, help="ray weights file")
    p.add_argument("--method", choices=("mcst", "ep", "fbp"), default="mcst",
                   help="mcst: layered transform penalty; ep: edge-preserving "
                        "baseline; fbp: filtered back-projection")
    p.add_argument("--model", default=None, help="trained model file (mcst)")
    p.add_argument("--beta", type=float, default=9.0e4,
                   help="penalty strength (mcst)")
    p.add_argument("--gamma", type=_float_list, default=(30.0, 10.0),
                   help="comma-separated code thresholds per layer (mcst)")
    p.add_argument("--outer", type=int, default=100,
                   help="outer iterations (mcst)")
    p.add_argument("--inner", type=int, default=2,
                   help="image updates per outer iteration (mcst)")
    p.add_argument("--ep-beta", type=float, default=2.0e4,
                   help="penalty strength (ep)")
    p.add_argument("--delta", type=float, default=20.0,
                   help="edge-preserving potential knee (ep)")
    p.add_argument("--iters", type=int, default=200, help="iterations (ep)")
    p.add_argument("--alpha", type=float, default=1.999,
                   help="over-relaxation parameter")
    p.add_argument("--cutoff", type=float, default=0.4,
                   help="filter cutoff as a fraction of Nyquist (fbp/init)")
    p.add_argument("--init", default="fbp",
                   help="'fbp' or a path to an initial image")
    p.add_argument("--out", required=True, help="output image path")
    p.add_argument("--trace", default=None, help="optional objective CSV path")
    _add_geometry_flags(p)
    p.set_defaults(func=_cmd_reconstruct)

    p = sub.add_parser("evaluate", help="compute image quality metrics",
                       description="Compare a reconstruction against ground "
                                   "truth; writes metric,value CSV.")
    p.add_argument("--recon", required=True, help="reconstructed image file")
    p.add_argument("--truth", required=True, help="ground-truth image file")
    p.add_argument("--metrics", type=lambda s: tuple(
        part.strip() for part in s.split(",") if part.strip()),
        default=("rmse", "ssim"), help="comma-separated: rmse,ssim")
    p.add_argument("--roi-circle", action="store_true",
                   help="restrict rmse to the inscribed circle")
    p.add_argument("--out", default=None,
                   help="CSV output path (default: stdout)")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("export-png", help="write a windowed 8-bit PNG",
                       description="Linearly map a display window to 0..255 "
                                   "grayscale; display only.")
    p.add_argument("--in", dest="input", required=True, help="input image file")
    p.add_argument("--window", type=_window, default=(800.0, 1200.0),
                   help="display window lo,hi")
    p.add_argument("--out", required=True, help="output PNG path")
    p.set_defaults(func=_cmd_export_png)

    p = sub.add_parser("run-experiment", help="run the full pipeline",
                       description="Chain simulate, train, reconstruct, and "
                                   "evaluate from one config file.")
    p.add_argument("--config", required=True, help="experiment config file")
    p.add_argument("--out-dir", required=True, help="artifact directory")
    p.add_argument("--seed", type=int, default=None,
                   help="override the config's master seed")
    p.add_argument("--workers", type=int, default=1,
                   help="worker pool size; the driver is sequential, so "
                        "values above 1 are accepted but equivalent")
    p.set_defaults(func=_cmd_run_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        result = args.func(args)
        return 0 if result is None else int(result)
    except _UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except ConfigError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except (SparsectError, OSError, ValueError, np.linalg.LinAlgError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
