"""
Configuration manager for experiment specs.
Defaults live in src/configs/defaults.json; a user JSON file and CLI flags are
layered on top and the result is validated into an ExperimentSpec.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field, asdict
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from dotenv import load_dotenv

from src.physics.geometry import GeometryError, SimConfig, build_scenario


_DEFAULTS_PATH = Path(__file__).resolve().parent.parent / "configs" / "defaults.json"

EXPERIMENTS = ("sumrate", "doa")
FORMATS = ("csv", "json")
EXECUTORS = ("thread", "process")
SCHEME_NAMES = ("joint", "average-pa", "codebook", "zf-4ta", "zf-8ta", "refine")
OPTIMIZERS = ("gradient", "spsa")


class ConfigError(ValueError):
    """Invalid configuration; `line` is the 1-based line in the config file when known."""

    def __init__(self, message: str, source: Optional[str] = None, line: Optional[int] = None,
                 key: Optional[str] = None):
        self.source = source
        self.line = line
        self.key = key
        location = source or "<config>"
        if line is not None:
            location = f"{location}:{line}"
        prefix = f"{location}: " if source or line is not None else ""
        suffix = f" (key '{key}')" if key else ""
        super().__init__(f"{prefix}{message}{suffix}")


@dataclass(frozen=True)
class ExperimentSpec:
    """Fully resolved experiment description; echoed into every output file."""
    experiment: str
    sim: Dict[str, Any]
    scenario: Dict[str, Any]
    layers: Tuple[int, ...]
    trials: int
    master_seed: int
    schemes: Tuple[str, ...] = ()
    output: Optional[str] = None
    format: str = "csv"
    max_workers: int = 1
    executor: str = "thread"
    record_timing: bool = False
    wbf: Dict[str, Any] = field(default_factory=dict)
    codebook_size: Optional[int] = None
    refinement: Dict[str, Any] = field(default_factory=dict)
    training: Dict[str, Any] = field(default_factory=dict)
    model_out: Optional[str] = None

    def sim_config(self, num_layers: int) -> SimConfig:
        return SimConfig(num_layers=num_layers, **self.sim)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["layers"] = list(self.layers)
        data["schemes"] = list(self.schemes)
        # geometry that follows from the resolved values, per layer count
        configs = {layers: self.sim_config(layers) for layers in self.layers}
        data["derived"] = {
            "propagation_delay_s": configs[self.layers[0]].propagation_delay,
            "inter_layer_gap_m": {str(layers): config.inter_layer_gap for layers, config in configs.items()},
        }
        return data


@lru_cache(maxsize=4)
def _load_defaults(path: str) -> Dict[str, Any]:
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)


def parse_layers(text: str) -> Tuple[int, ...]:
    """
    "a..b" (inclusive range) or a comma list "1,3,5".

    Raises:
        ConfigError: Malformed text or a value < 1
    """
    text = str(text).strip()
    match = re.fullmatch(r"(\d+)\s*\.\.\s*(\d+)", text)
    if match:
        layers = tuple(range(int(match.group(1)), int(match.group(2)) + 1))
    else:
        try:
            layers = tuple(int(part) for part in text.split(",") if part.strip())
        except ValueError as e:
            raise ConfigError(f"cannot parse layers '{text}' (expected a..b or a comma list)", key="layers") from e
    if not layers or min(layers) < 1:
        raise ConfigError(f"layers must be a non-empty list of integers >= 1, got '{text}'", key="layers")
    return layers


def _locate(text: Optional[str], path: Tuple[str, ...]) -> Optional[int]:
    """1-based line of the last key of `path` in a JSON text, following the nesting in order."""
    if text is None:
        return None
    position = 0
    line = None
    for name in path:
        match = re.compile(r'"%s"\s*:' % re.escape(name)).search(text, position)
        if match is None:
            return line
        position = match.end()
        line = text.count("\n", 0, match.start()) + 1
    return line


def _same_type(value: Any, default: Any) -> bool:
    if default is None or value is None:
        return True
    if isinstance(default, bool):
        return isinstance(value, bool)
    if isinstance(default, float):
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if isinstance(default, int):
        return isinstance(value, int) and not isinstance(value, bool)
    if isinstance(default, list):
        return isinstance(value, list)
    return isinstance(value, type(default))


class ConfigManager:
    """
    Loads the default configuration and resolves experiment specs from it.
    """

    def __init__(self, defaults_path: str | None = None) -> None:
        load_dotenv()
        self.defaults_path = str(defaults_path or _DEFAULTS_PATH)

    def defaults(self, experiment: str) -> Dict[str, Any]:
        """Merged common + experiment defaults (a fresh copy)."""
        if experiment not in EXPERIMENTS:
            raise ConfigError(f"Unknown experiment '{experiment}'. Available: {list(EXPERIMENTS)}")
        data = _load_defaults(self.defaults_path)
        return json.loads(json.dumps({**data["common"], **data[experiment]}))

    def resolve(self, experiment: str, config_path: Optional[str] = None,
                overrides: Optional[Dict[str, Any]] = None) -> ExperimentSpec:
        """
        Layer defaults, environment, the user config file and CLI overrides.

        Args:
            experiment: "sumrate" or "doa"
            config_path: Optional user JSON file
            overrides: CLI values (None entries are ignored)

        Returns:
            Validated ExperimentSpec

        Raises:
            ConfigError: Unreadable file, unknown key, wrong type or invalid value
        """
        values = self.defaults(experiment)
        self._apply_environment(values)

        text = None
        source = None
        if config_path is not None:
            source = str(config_path)
            try:
                text = Path(config_path).read_text(encoding="utf-8")
            except OSError as e:
                raise ConfigError(f"cannot read config file: {e}", source=source) from e
            try:
                user = json.loads(text)
            except json.JSONDecodeError as e:
                raise ConfigError(f"invalid JSON: {e.msg} (column {e.colno})", source=source, line=e.lineno) from e
            if not isinstance(user, dict):
                raise ConfigError("config file must contain a JSON object", source=source, line=1)
            self._merge(values, user, (), text, source)

        for name, value in (overrides or {}).items():
            if value is None:
                continue
            if name not in values:
                raise ConfigError(f"unknown option '{name}'", key=name)
            values[name] = list(value) if isinstance(value, tuple) else value

        return self._build(experiment, values, text, source)

    def _apply_environment(self, values: Dict[str, Any]) -> None:
        for variable, name in (("SIM_SEED", "master_seed"), ("SIM_MAX_WORKERS", "max_workers")):
            raw = os.environ.get(variable)
            if raw is None or not raw.strip():
                continue
            try:
                values[name] = int(raw)
            except ValueError as e:
                raise ConfigError(f"environment variable {variable} must be an integer, got '{raw}'", key=name) from e

    def _merge(self, target: Dict[str, Any], user: Dict[str, Any], path: Tuple[str, ...],
               text: Optional[str], source: Optional[str]) -> None:
        for name, value in user.items():
            key_path = path + (name,)
            line = _locate(text, key_path)
            dotted = ".".join(key_path)
            if name not in target:
                raise ConfigError("unknown key", source=source, line=line, key=dotted)
            default = target[name]
            if isinstance(default, dict) and name not in ("scenario",):
                if not isinstance(value, dict):
                    raise ConfigError("expected an object", source=source, line=line, key=dotted)
                self._merge(default, value, key_path, text, source)
                continue
            if isinstance(default, dict):
                if not isinstance(value, dict):
                    raise ConfigError("expected an object", source=source, line=line, key=dotted)
                default.update(value)
                continue
            if name == "layers" and not path and isinstance(value, str):
                target[name] = value
                continue
            if not _same_type(value, default):
                raise ConfigError(f"expected {type(default).__name__}, got {type(value).__name__}",
                                  source=source, line=line, key=dotted)
            target[name] = value

    def _build(self, experiment: str, values: Dict[str, Any], text: Optional[str],
               source: Optional[str]) -> ExperimentSpec:
        def fail(message: str, *path: str) -> ConfigError:
            return ConfigError(message, source=source, line=_locate(text, path), key=".".join(path))

        layers = values["layers"]
        layers = parse_layers(layers) if isinstance(layers, str) else tuple(layers)
        if not layers or any(not isinstance(l, int) or isinstance(l, bool) or l < 1 for l in layers):
            raise fail("layers must be a non-empty list of integers >= 1", "layers")
        if not isinstance(values["trials"], int) or values["trials"] < 1:
            raise fail("trials must be an integer >= 1", "trials")
        if not isinstance(values["master_seed"], int) or values["master_seed"] < 0:
            raise fail("master_seed must be a non-negative integer", "master_seed")
        if values["format"] not in FORMATS:
            raise fail(f"format must be one of {list(FORMATS)}", "format")
        if values["executor"] not in EXECUTORS:
            raise fail(f"executor must be one of {list(EXECUTORS)}", "executor")
        if not isinstance(values["max_workers"], int) or values["max_workers"] < 1:
            raise fail("max_workers must be an integer >= 1", "max_workers")

        for num_layers in layers:
            try:
                config = SimConfig(num_layers=num_layers, **values["sim"])
            except (GeometryError, TypeError) as e:
                raise fail(str(e), "sim") from e
        try:
            build_scenario("multiuser" if experiment == "sumrate" else "doa", config, values["scenario"])
        except GeometryError as e:
            raise fail(str(e), "scenario") from e

        schemes: Tuple[str, ...] = ()
        if experiment == "sumrate":
            schemes = tuple(values["schemes"])
            unknown = [s for s in schemes if s not in SCHEME_NAMES]
            if not schemes or unknown:
                raise fail(f"schemes must be a non-empty subset of {list(SCHEME_NAMES)}", "schemes")
            wbf = values["wbf"]
            if wbf["max_iters"] < 1 or wbf["restarts"] < 1 or not wbf["tolerance"] > 0:
                raise fail("wbf needs max_iters >= 1, restarts >= 1 and tolerance > 0", "wbf")
            size = values["codebook_size"]
            if size is not None and (isinstance(size, bool) or not isinstance(size, int) or size < 1):
                raise fail(f"codebook_size must be an integer >= 1, got {size!r}", "codebook_size")
            if values["refinement"]["levels"] < 2 or values["refinement"]["sweeps"] < 1:
                raise fail("refinement needs levels >= 2 and sweeps >= 1", "refinement")
        else:
            training = values["training"]
            if training["optimizer"] not in OPTIMIZERS:
                raise fail(f"optimizer must be one of {list(OPTIMIZERS)}", "training", "optimizer")
            for name in ("train_samples", "test_samples", "batch_size", "max_epochs", "patience"):
                if training[name] < 1:
                    raise fail(f"{name} must be >= 1", "training", name)

        return ExperimentSpec(
            experiment=experiment,
            sim=values["sim"],
            scenario=values["scenario"],
            layers=layers,
            trials=values["trials"],
            master_seed=values["master_seed"],
            schemes=schemes,
            output=values["output"],
            format=values["format"],
            max_workers=values["max_workers"],
            executor=values["executor"],
            record_timing=bool(values["record_timing"]),
            wbf=values.get("wbf", {}),
            codebook_size=values.get("codebook_size"),
            refinement=values.get("refinement", {}),
            training=values.get("training", {}),
            model_out=values.get("model_out"),
        )


def resolve_spec(experiment: str, config_path: Optional[str] = None,
                 overrides: Optional[Dict[str, Any]] = None) -> ExperimentSpec:
    """Shortcut for ConfigManager().resolve(...)."""
    return ConfigManager().resolve(experiment, config_path, overrides)
