"""
Unit Tests for ConfigManager
Layering of defaults, environment, config file and CLI overrides.
"""

import json

import pytest

from src.physics.units import SPEED_OF_LIGHT
from src.utils.config_manager import ConfigError, ConfigManager, parse_layers, resolve_spec


def _write(tmp_path, text):
    path = tmp_path / "experiment.json"
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestParseLayers:
    """Layer list syntax."""

    def test_range(self):
        assert parse_layers("1..4") == (1, 2, 3, 4)

    def test_comma_list(self):
        assert parse_layers("1, 3,5") == (1, 3, 5)

    @pytest.mark.parametrize("text", ["", "0..3", "a..b", "1;2", "-1"])
    def test_invalid(self, text):
        with pytest.raises(ConfigError):
            parse_layers(text)


class TestDefaults:
    """Resolution without a config file."""

    def test_sumrate_defaults(self):
        spec = resolve_spec("sumrate")
        assert spec.layers == tuple(range(1, 11))
        assert spec.trials == 200
        assert spec.master_seed == 0
        assert spec.schemes == ("joint", "average-pa", "codebook", "zf-4ta", "zf-8ta")
        assert spec.sim["atoms_per_layer"] == 49
        assert spec.scenario["noise_power_dbm"] == -100.0
        assert spec.format == "csv"

    def test_doa_defaults(self):
        spec = resolve_spec("doa")
        assert spec.sim["atoms_per_layer"] == 100
        assert spec.scenario["noise_power_dbm"] == -140.0
        assert spec.training["train_samples"] == 1000
        assert spec.training["test_samples"] == 100
        assert spec.schemes == ()

    def test_sim_config_for_layer(self):
        spec = resolve_spec("sumrate")
        config = spec.sim_config(7)
        assert config.num_layers == 7
        assert config.atoms_per_layer == 49

    def test_unknown_experiment(self):
        with pytest.raises(ConfigError, match="Unknown experiment"):
            ConfigManager().defaults("uplink")

    def test_defaults_are_fresh_copies(self):
        manager = ConfigManager()
        first = manager.defaults("sumrate")
        first["sim"]["atoms_per_layer"] = 1
        assert manager.defaults("sumrate")["sim"]["atoms_per_layer"] == 49

    def test_to_dict_is_json_serializable(self):
        data = resolve_spec("sumrate").to_dict()
        assert json.loads(json.dumps(data))["layers"] == list(range(1, 11))

    def test_to_dict_reports_derived_geometry(self):
        spec = resolve_spec("sumrate", overrides={"layers": [1, 10]})
        derived = spec.to_dict()["derived"]
        config = spec.sim_config(10)
        assert derived["propagation_delay_s"] == pytest.approx(5 * config.wavelength / SPEED_OF_LIGHT)
        assert derived["inter_layer_gap_m"]["10"] == pytest.approx(config.wavelength / 2)
        assert derived["inter_layer_gap_m"]["1"] == pytest.approx(5 * config.wavelength)


class TestLayering:
    """Environment, file and CLI precedence."""

    def test_environment_seed(self, monkeypatch):
        monkeypatch.setenv("SIM_SEED", "42")
        assert resolve_spec("sumrate").master_seed == 42

    def test_cli_beats_environment(self, monkeypatch):
        monkeypatch.setenv("SIM_SEED", "42")
        assert resolve_spec("sumrate", overrides={"master_seed": 7}).master_seed == 7

    def test_invalid_environment(self, monkeypatch):
        monkeypatch.setenv("SIM_MAX_WORKERS", "many")
        with pytest.raises(ConfigError, match="SIM_MAX_WORKERS"):
            resolve_spec("sumrate")

    def test_file_overrides_nested_keys(self, tmp_path):
        path = _write(tmp_path, json.dumps({"sim": {"atoms_per_layer": 16}, "trials": 3, "layers": "2..3"}))
        spec = resolve_spec("sumrate", path)
        assert spec.sim["atoms_per_layer"] == 16
        assert spec.sim["num_antennas"] == 4
        assert spec.trials == 3
        assert spec.layers == (2, 3)

    def test_cli_overrides_file(self, tmp_path):
        path = _write(tmp_path, json.dumps({"trials": 3}))
        spec = resolve_spec("sumrate", path, {"trials": 5, "layers": "1,4", "schemes": ["zf-4ta"]})
        assert spec.trials == 5
        assert spec.layers == (1, 4)
        assert spec.schemes == ("zf-4ta",)

    def test_none_overrides_ignored(self):
        assert resolve_spec("sumrate", overrides={"trials": None}).trials == 200


class TestErrors:
    """Line-precise configuration errors."""

    def test_unknown_key_reports_line(self, tmp_path):
        path = _write(tmp_path, '{\n  "trials": 3,\n  "trails": 4\n}\n')
        with pytest.raises(ConfigError) as excinfo:
            resolve_spec("sumrate", path)
        assert excinfo.value.line == 3
        assert excinfo.value.key == "trails"
        assert f"{path}:3:" in str(excinfo.value)

    def test_nested_unknown_key(self, tmp_path):
        path = _write(tmp_path, '{\n  "sim": {\n    "atoms": 9\n  }\n}\n')
        with pytest.raises(ConfigError) as excinfo:
            resolve_spec("sumrate", path)
        assert excinfo.value.line == 3
        assert excinfo.value.key == "sim.atoms"

    def test_wrong_type(self, tmp_path):
        path = _write(tmp_path, '{\n  "trials": "many"\n}\n')
        with pytest.raises(ConfigError, match="expected int"):
            resolve_spec("sumrate", path)

    def test_invalid_json_line(self, tmp_path):
        path = _write(tmp_path, '{\n  "trials": 3,\n}\n')
        with pytest.raises(ConfigError) as excinfo:
            resolve_spec("sumrate", path)
        assert excinfo.value.line == 3

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            resolve_spec("sumrate", str(tmp_path / "absent.json"))

    def test_invalid_value_reports_line(self, tmp_path):
        path = _write(tmp_path, '{\n  "format": "xml"\n}\n')
        with pytest.raises(ConfigError) as excinfo:
            resolve_spec("sumrate", path)
        assert excinfo.value.line == 2

    def test_non_square_atoms(self, tmp_path):
        path = _write(tmp_path, '{\n  "sim": {"atoms_per_layer": 50}\n}\n')
        with pytest.raises(ConfigError, match="perfect square"):
            resolve_spec("sumrate", path)

    @pytest.mark.parametrize("size", [2.5, "x", True, 0])
    def test_codebook_size_must_be_positive_int(self, tmp_path, size):
        path = _write(tmp_path, json.dumps({"codebook_size": size}))
        with pytest.raises(ConfigError, match="codebook_size must be an integer") as excinfo:
            resolve_spec("sumrate", path)
        assert excinfo.value.key == "codebook_size"

    def test_unknown_scheme(self):
        with pytest.raises(ConfigError, match="schemes"):
            resolve_spec("sumrate", overrides={"schemes": ["mmse"]})

    def test_user_position_count(self, tmp_path):
        path = _write(tmp_path, json.dumps({"scenario": {"user_positions": [[0.0, 50.0, 0.0]]}}))
        with pytest.raises(ConfigError, match="user positions"):
            resolve_spec("sumrate", path)

    def test_unknown_optimizer(self, tmp_path):
        path = _write(tmp_path, '{\n  "training": {\n    "optimizer": "adam"\n  }\n}\n')
        with pytest.raises(ConfigError) as excinfo:
            resolve_spec("doa", path)
        assert excinfo.value.line == 3

    def test_unknown_cli_option(self):
        with pytest.raises(ConfigError, match="unknown option"):
            resolve_spec("doa", overrides={"schemes": ["joint"]})
