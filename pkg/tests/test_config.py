"""Tests for the strict INI experiment configuration."""

import pytest

from sparsect.config import (
    ConfigError,
    ExperimentConfig,
    load_config,
    parse_config,
    render_config,
    replace_seed,
)


class TestParse:
    def test_empty_text_yields_defaults(self):
        assert parse_config("") == ExperimentConfig()

    def test_roundtrip_through_render(self):
        config = ExperimentConfig()
        assert parse_config(render_config(config)) == config

    def test_roundtrip_with_overrides(self):
        text = """
[experiment]
seed = 7
test_phantom = random-head
training_slices = 2
patch_size = 4

[scan]
image_size = 32
n_views = 24
n_bins = 47

[train]
clusters_per_layer = 2,3
thresholds = 50.0,40.0
iterations = 3

[recon]
beta = 1234.5
code_thresholds = 20,5

[ep]
beta = 55.0

[fbp]
cutoff = 0.5
"""
        config = parse_config(text)
        assert config.seed == 7
        assert config.test_phantom == "random-head"
        assert config.scan.image_size == 32
        assert config.scan.n_views == 24
        assert config.train.clusters_per_layer == (2, 3)
        assert config.train.thresholds == (50.0, 40.0)
        assert config.recon.beta == 1234.5
        assert config.recon.code_thresholds == (20.0, 5.0)
        assert config.ep.beta == 55.0
        assert config.fbp_cutoff == 0.5
        # Unspecified keys keep their defaults.
        assert config.scan.pixel_size == ExperimentConfig().scan.pixel_size
        assert parse_config(render_config(config)) == config

    def test_render_is_deterministic(self):
        a = render_config(ExperimentConfig())
        b = render_config(ExperimentConfig())
        assert a == b

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("[volcano]\nheat = 9000\n")

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("[scan]\nwavelength = 3\n")

    def test_bad_value_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("[scan]\nimage_size = tiny\n")

    def test_malformed_ini_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("image_size = 12\n")

    def test_invalid_combination_rejected(self):
        # Two training layers but three reconstruction thresholds.
        text = "[recon]\ncode_thresholds = 30,10,5\n"
        with pytest.raises(ConfigError):
            parse_config(text)

    def test_invalid_domain_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("[scan]\nimage_size = -4\n")
        with pytest.raises(ConfigError):
            parse_config("[fbp]\ncutoff = 1.5\n")


class TestLoad:
    def test_load_reads_file(self, tmp_path):
        path = tmp_path / "exp.ini"
        path.write_text("[experiment]\nseed = 11\n", encoding="utf-8")
        assert load_config(path).seed == 11

    def test_missing_file_raises_oserror(self, tmp_path):
        with pytest.raises(OSError):
            load_config(tmp_path / "absent.ini")


class TestReplaceSeed:
    def test_only_seed_changes(self):
        base = ExperimentConfig()
        changed = replace_seed(base, 99)
        assert changed.seed == 99
        assert changed.scan == base.scan
        assert changed.train == base.train
        assert replace_seed(changed, 0) == base
