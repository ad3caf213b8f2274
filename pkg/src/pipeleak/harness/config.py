"""Scenario configuration: JSON documents with strict key checking."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from ..hydraulics import FluidProperties, LeakSpec, OperatingPoint, PipeGeometry, PipelineConfig
from ..observer import AdaptationConfig
from ..simcore import NoiseSpec

MODES = ("nonlinear", "linear")
BUNDLED = {"scenario-A": "scenario_a.json", "scenario-B": "scenario_b.json"}


class ConfigError(ValueError):
    """Malformed scenario configuration; the message names the offending field."""


@dataclass(frozen=True)
class GridParams:
    n_cells: int = 200
    t_end: float = 50.0


@dataclass(frozen=True)
class OutputParams:
    dir: str = "out"
    stride: int = 10


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "scenario"
    mode: str = "nonlinear"
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    adaptation: AdaptationConfig = field(default_factory=AdaptationConfig)
    grid: GridParams = field(default_factory=GridParams)
    output: OutputParams = field(default_factory=OutputParams)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode: expected one of {MODES}, got {self.mode!r}")
        leak = self.pipeline.leak
        if leak is not None and not self.grid.t_end > leak.onset_time:
            raise ConfigError("grid.t_end: must exceed leak.onset_time")
        if self.grid.n_cells < 16:
            raise ConfigError("grid.n_cells: must be at least 16")
        if self.grid.t_end <= 0:
            raise ConfigError("grid.t_end: must be positive")
        if self.output.stride < 1:
            raise ConfigError("output.stride: must be >= 1")

    @property
    def leak(self) -> LeakSpec | None:
        return self.pipeline.leak

    def with_overrides(self, seed=None, out=None, cells=None) -> ScenarioConfig:
        cfg = self
        if seed is not None:
            cfg = dataclasses.replace(cfg, noise=dataclasses.replace(cfg.noise, seed=int(seed)))
        if out is not None:
            cfg = dataclasses.replace(cfg, output=dataclasses.replace(cfg.output, dir=str(out)))
        if cells is not None:
            cfg = dataclasses.replace(cfg, grid=dataclasses.replace(cfg.grid, n_cells=int(cells)))
        return cfg


_SECTIONS = {
    "fluid": FluidProperties,
    "geometry": PipeGeometry,
    "operating_point": OperatingPoint,
    "leak": LeakSpec,
    "noise": NoiseSpec,
    "adaptation": AdaptationConfig,
    "grid": GridParams,
    "output": OutputParams,
}
_TOP = {"name", "mode", *_SECTIONS}


def _build(section: str, cls, data):
    if not isinstance(data, dict):
        raise ConfigError(f"{section}: expected an object")
    known = {f.name: f for f in dataclasses.fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError(f"{section}.{key}: unknown key")
    kwargs = {}
    for key, value in data.items():
        default = known[key].default
        if isinstance(default, bool) and not isinstance(value, bool):
            raise ConfigError(f"{section}.{key}: expected a boolean")
        if isinstance(default, (int, float)) and not isinstance(default, bool):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{section}.{key}: expected a number")
            if isinstance(default, int) and not isinstance(default, bool):
                if not float(value).is_integer():
                    raise ConfigError(f"{section}.{key}: expected an integer")
                value = int(value)
        if isinstance(default, str) and not isinstance(value, str):
            raise ConfigError(f"{section}.{key}: expected a string")
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{section}: {exc}") from exc


def config_from_dict(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("config: expected a JSON object")
    for key in data:
        if key not in _TOP:
            raise ConfigError(f"{key}: unknown key")
    parts = {}
    for section, cls in _SECTIONS.items():
        if section == "leak" and data.get("leak", {}) is None:
            parts[section] = None
            continue
        parts[section] = _build(section, cls, data.get(section, {}))
    try:
        pipeline = PipelineConfig(parts["fluid"], parts["geometry"], parts["operating_point"], parts["leak"])
    except ValueError as exc:
        raise ConfigError(f"leak.position: {exc}") from exc
    name = data.get("name", "scenario")
    mode = data.get("mode", "nonlinear")
    if not isinstance(name, str):
        raise ConfigError("name: expected a string")
    return ScenarioConfig(
        name=name,
        mode=mode,
        pipeline=pipeline,
        noise=parts["noise"],
        adaptation=parts["adaptation"],
        grid=parts["grid"],
        output=parts["output"],
    )


def config_to_dict(cfg: ScenarioConfig) -> dict:
    p = cfg.pipeline
    out = {
        "name": cfg.name,
        "mode": cfg.mode,
        "fluid": dataclasses.asdict(p.fluid),
        "geometry": dataclasses.asdict(p.geometry),
        "operating_point": dataclasses.asdict(p.operating_point),
        "leak": dataclasses.asdict(p.leak) if p.leak is not None else None,
        "noise": dataclasses.asdict(cfg.noise),
        "adaptation": dataclasses.asdict(cfg.adaptation),
        "grid": dataclasses.asdict(cfg.grid),
        "output": dataclasses.asdict(cfg.output),
    }
    return out


def load_config(path) -> ScenarioConfig:
    """Load a JSON scenario file, or a bundled scenario by name (``scenario-A``)."""
    if str(path) in BUNDLED:
        text = resources.files("pipeleak.scenarios").joinpath(BUNDLED[str(path)]).read_text()
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"config: cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON ({exc})") from exc
    return config_from_dict(data)


def bundled(name: str) -> ScenarioConfig:
    return load_config(name)


def set_param(cfg: ScenarioConfig, dotted: str, value) -> ScenarioConfig:
    """Return a copy with ``section.key`` replaced (used by parameter sweeps)."""
    data = config_to_dict(cfg)
    section, _, key = dotted.partition(".")
    if not key:
        if section not in ("name", "mode"):
            raise ConfigError(f"{dotted}: expected section.key")
        data[section] = value
    else:
        if section not in _SECTIONS or not isinstance(data.get(section), dict):
            raise ConfigError(f"{dotted}: unknown section")
        if key not in data[section]:
            raise ConfigError(f"{dotted}: unknown key")
        data[section][key] = value
    return config_from_dict(data)
