"""Experiment configuration: strict INI files driving the full pipeline.

Sections mirror the dataclasses they configure ([scan], [noise], [train],
[recon], [ep]); [experiment] holds the master seed and pipeline knobs and
[fbp] the filter cutoff.  Unknown sections or keys are rejected so typos
fail loudly, and every run can write its resolved configuration back out
in a canonical form.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, replace

from .ctscan import NoiseModel, ScanGeometry
from .errors import SparsectError
from .recon import EpConfig, ReconConfig
from .training import TrainConfig


class ConfigError(SparsectError):
    """Malformed or unknown experiment configuration content."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to run simulate, train, reconstruct, and evaluate."""

    seed: int = 0
    test_phantom: str = "shepp-logan"
    training_slices: int = 3
    train_stride: int = 1
    patch_size: int = 8
    fbp_cutoff: float = 0.4
    scan: ScanGeometry = ScanGeometry()
    noise: NoiseModel = NoiseModel()
    train: TrainConfig = TrainConfig(
        clusters_per_layer=(5, 5), thresholds=(80.0, 60.0), iterations=50
    )
    recon: ReconConfig = ReconConfig(
        beta=9.0e4, code_thresholds=(30.0, 10.0),
        outer_iterations=100, inner_iterations=2,
    )
    ep: EpConfig = EpConfig(beta=2.0e4, delta=20.0, iterations=200)

    def __post_init__(self) -> None:
        if self.training_slices < 1:
            raise ConfigError("training_slices must be positive")
        if self.train_stride < 1:
            raise ConfigError("train_stride must be positive")
        if self.patch_size < 1:
            raise ConfigError("patch_size must be positive")
        if not 0.0 < self.fbp_cutoff <= 1.0:
            raise ConfigError("fbp_cutoff must lie in (0, 1]")
        if len(self.recon.code_thresholds) != len(self.train.clusters_per_layer):
            raise ConfigError(
                "recon code_thresholds and train clusters_per_layer "
                "must have the same length"
            )


def _parse_int(text: str) -> int:
    return int(text.strip())


def _parse_float(text: str) -> float:
    return float(text.strip())


def _parse_int_tuple(text: str) -> tuple[int, ...]:
    return tuple(int(part.strip()) for part in text.split(",") if part.strip())


def _parse_float_tuple(text: str) -> tuple[float, ...]:
    return tuple(float(part.strip()) for part in text.split(",") if part.strip())


def _parse_str(text: str) -> str:
    return text.strip()


_SCHEMA = {
    "experiment": {
        "seed": _parse_int,
        "test_phantom": _parse_str,
        "training_slices": _parse_int,
        "train_stride": _parse_int,
        "patch_size": _parse_int,
    },
    "scan": {
        "image_size": _parse_int,
        "pixel_size": _parse_float,
        "n_views": _parse_int,
        "n_bins": _parse_int,
        "det_spacing": _parse_float,
    },
    "noise": {
        "incident_photons": _parse_float,
        "electronic_sigma": _parse_float,
        "attenuation_per_unit": _parse_float,
    },
    "train": {
        "clusters_per_layer": _parse_int_tuple,
        "thresholds": _parse_float_tuple,
        "iterations": _parse_int,
    },
    "recon": {
        "beta": _parse_float,
        "code_thresholds": _parse_float_tuple,
        "outer_iterations": _parse_int,
        "inner_iterations": _parse_int,
        "alpha": _parse_float,
    },
    "ep": {
        "beta": _parse_float,
        "delta": _parse_float,
        "iterations": _parse_int,
        "alpha": _parse_float,
    },
    "fbp": {
        "cutoff": _parse_float,
    },
}


def parse_config(text: str) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from INI text, rejecting unknowns."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc

    values: dict[str, dict[str, object]] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        values[section] = {}
        for key, raw in parser[section].items():
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            try:
                values[section][key] = _SCHEMA[section][key](raw)
            except ValueError as exc:
                raise ConfigError(
                    f"bad value for {key!r} in section [{section}]: {raw!r}"
                ) from exc

    defaults = ExperimentConfig()
    try:
        scan = ScanGeometry(
            **{
                field: values.get("scan", {}).get(field, getattr(defaults.scan, field))
                for field in _SCHEMA["scan"]
            }
        )
        noise = NoiseModel(
            **{
                field: values.get("noise", {}).get(field, getattr(defaults.noise, field))
                for field in _SCHEMA["noise"]
            }
        )
        train = TrainConfig(
            clusters_per_layer=tuple(
                values.get("train", {}).get(
                    "clusters_per_layer", defaults.train.clusters_per_layer
                )
            ),
            thresholds=tuple(
                values.get("train", {}).get("thresholds", defaults.train.thresholds)
            ),
            iterations=values.get("train", {}).get(
                "iterations", defaults.train.iterations
            ),
            seed=0,
        )
        recon = ReconConfig(
            beta=values.get("recon", {}).get("beta", defaults.recon.beta),
            code_thresholds=tuple(
                values.get("recon", {}).get(
                    "code_thresholds", defaults.recon.code_thresholds
                )
            ),
            outer_iterations=values.get("recon", {}).get(
                "outer_iterations", defaults.recon.outer_iterations
            ),
            inner_iterations=values.get("recon", {}).get(
                "inner_iterations", defaults.recon.inner_iterations
            ),
            alpha=values.get("recon", {}).get("alpha", defaults.recon.alpha),
        )
        ep = EpConfig(
            beta=values.get("ep", {}).get("beta", defaults.ep.beta),
            delta=values.get("ep", {}).get("delta", defaults.ep.delta),
            iterations=values.get("ep", {}).get("iterations", defaults.ep.iterations),
            alpha=values.get("ep", {}).get("alpha", defaults.ep.alpha),
        )
        experiment = values.get("experiment", {})
        return ExperimentConfig(
            seed=experiment.get("seed", defaults.seed),
            test_phantom=experiment.get("test_phantom", defaults.test_phantom),
            training_slices=experiment.get(
                "training_slices", defaults.training_slices
            ),
            train_stride=experiment.get("train_stride", defaults.train_stride),
            patch_size=experiment.get("patch_size", defaults.patch_size),
            fbp_cutoff=values.get("fbp", {}).get("cutoff", defaults.fbp_cutoff),
            scan=scan,
            noise=noise,
            train=train,
            recon=recon,
            ep=ep,
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def render_config(config: ExperimentConfig) -> str:
    """Serialize the resolved configuration in canonical INI form."""

    def fmt(value) -> str:
        if isinstance(value, tuple):
            return ",".join(fmt(v) for v in value)
        if isinstance(value, float):
            return repr(value)
        return str(value)

    out = io.StringIO()
    sections = {
        "experiment": {
            "seed": config.seed,
            "test_phantom": config.test_phantom,
            "training_slices": config.training_slices,
            "train_stride": config.train_stride,
            "patch_size": config.patch_size,
        },
        "scan": {
            field: getattr(config.scan, field) for field in _SCHEMA["scan"]
        },
        "noise": {
            field: getattr(config.noise, field) for field in _SCHEMA["noise"]
        },
        "train": {
            "clusters_per_layer": config.train.clusters_per_layer,
            "thresholds": config.train.thresholds,
            "iterations": config.train.iterations,
        },
        "recon": {
            "beta": config.recon.beta,
            "code_thresholds": config.recon.code_thresholds,
            "outer_iterations": config.recon.outer_iterations,
            "inner_iterations": config.recon.inner_iterations,
            "alpha": config.recon.alpha,
        },
        "ep": {
            "beta": config.ep.beta,
            "delta": config.ep.delta,
            "iterations": config.ep.iterations,
            "alpha": config.ep.alpha,
        },
        "fbp": {
            "cutoff": config.fbp_cutoff,
        },
    }
    for name, pairs in sections.items():
        out.write(f"[{name}]\n")
        for key, value in pairs.items():
            out.write(f"{key} = {fmt(value)}\n")
        out.write("\n")
    return out.getvalue()


def replace_seed(config: ExperimentConfig, seed: int) -> ExperimentConfig:
    """Copy of the config with a different master seed."""
    return replace(config, seed=int(seed))
