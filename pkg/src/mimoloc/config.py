"""Flat experiment configuration document.

One key-value namespace covers the system parameters, offset distribution,
evaluation grid, sweep lists and seeds. Unknown keys are rejected so typos
fail loudly. Configs load from JSON and accept ``key=value`` overrides.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field, fields
from typing import Any, Optional, Sequence

from .errors import ConfigError
from .model import ArrayGeometry, OffsetSpec, SystemConfig, UeLocation
from .saf import SpatialGrid

_PI = math.pi


@dataclass
class ExperimentConfig:
    # System (defaults follow the reference testbed parameters)
    carrier_frequency: float = 3.5e9
    subcarrier_spacing: float = 180e3
    num_subcarriers: int = 100
    num_antennas: int = 64
    antenna_spacing: float = 0.07
    num_symbols: int = 1
    snr_db: Optional[float] = 9.0
    amplitude_model: str = "unit"
    # Transmitter ground truth
    ue_x: float = -2.0
    ue_y: float = 1.0
    # Offset distribution
    freq_std: float = 0.0
    spatial_half_width: float = 0.0
    freq_mean: float = 0.0
    seed: int = 0
    # Evaluation grid
    grid_x_min: float = -3.0
    grid_x_max: float = 3.0
    grid_y_min: float = 0.5
    grid_y_max: float = 16.0
    grid_step: float = 0.02
    mainlobe_radius: float = 0.5
    # Sweeps
    sweep_sigmas: list[float] = field(
        default_factory=lambda: [0.0, _PI / 16, _PI / 8, _PI / 4, _PI / 2, _PI])
    sweep_antenna_counts: list[int] = field(default_factory=lambda: [16, 32, 64])
    saf_sigmas: list[float] = field(default_factory=lambda: [_PI / 4])
    seeds: list[int] = field(default_factory=lambda: list(range(20)))
    # Calibration
    oversampling: int = 64
    # Output
    out_dir: str = "out"

    def system(self) -> SystemConfig:
        try:
            return SystemConfig(
                carrier_frequency=self.carrier_frequency,
                subcarrier_spacing=self.subcarrier_spacing,
                num_subcarriers=self.num_subcarriers,
                num_antennas=self.num_antennas,
                antenna_spacing=self.antenna_spacing,
                num_symbols=self.num_symbols,
                snr_db=self.snr_db,
                amplitude_model=self.amplitude_model,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def geometry(self) -> ArrayGeometry:
        return ArrayGeometry.ula(self.num_antennas, self.antenna_spacing)

    def ue_location(self) -> UeLocation:
        return UeLocation(self.ue_x, self.ue_y)

    def offsets(self) -> OffsetSpec:
        try:
            return OffsetSpec(freq_std=self.freq_std,
                              spatial_half_width=self.spatial_half_width,
                              freq_mean=self.freq_mean, seed=self.seed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def grid(self) -> SpatialGrid:
        try:
            return SpatialGrid(self.grid_x_min, self.grid_x_max,
                               self.grid_y_min, self.grid_y_max, self.grid_step)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def as_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


_DEFAULTS = ExperimentConfig()
_FIELD_NAMES = {f.name for f in fields(ExperimentConfig)}
_STRING_FIELDS = {"amplitude_model", "out_dir"}
_INT_LIST_FIELDS = {"sweep_antenna_counts", "seeds"}
_FLOAT_LIST_FIELDS = {"sweep_sigmas", "saf_sigmas"}


def _to_int(name: str, value: Any) -> int:
    as_float = float(value)
    if as_float != int(as_float):
        raise ValueError(f"{name} must be an integer")
    return int(as_float)


def _coerce(name: str, value: Any) -> Any:
    """Coerce a raw JSON/string value onto the declared field type."""
    try:
        if name == "snr_db":
            if value is None or (isinstance(value, str) and value.lower() in ("none", "null")):
                return None
            return float(value)
        if name in _STRING_FIELDS:
            return str(value)
        if name in _INT_LIST_FIELDS or name in _FLOAT_LIST_FIELDS:
            if isinstance(value, str):
                value = [v.strip() for v in value.split(",") if v.strip() != ""]
            if not isinstance(value, (list, tuple)):
                raise ValueError("expected a list")
            if name in _INT_LIST_FIELDS:
                return [_to_int(name, v) for v in value]
            return [float(v) for v in value]
        current = getattr(_DEFAULTS, name)
        if isinstance(current, int):
            return _to_int(name, value)
        return float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid value for {name!r}: {value!r} ({exc})") from exc


def _build(values: dict[str, Any]) -> ExperimentConfig:
    clean: dict[str, Any] = {}
    for key, value in values.items():
        if key not in _FIELD_NAMES:
            raise ConfigError(f"unknown configuration key {key!r}")
        clean[key] = _coerce(key, value)
    return ExperimentConfig(**clean)


def load_config(path: Optional[str] = None,
                overrides: Sequence[str] = ()) -> ExperimentConfig:
    """Build a config from an optional JSON file plus ``key=value`` overrides."""
    values: dict[str, Any] = {}
    if path is not None:
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path!r} is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config document must be a JSON object")
        values.update(doc)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, _, raw = item.partition("=")
        values[key.strip()] = raw.strip()
    return _build(values)


def config_header_lines(config: ExperimentConfig) -> list[str]:
    """``# key=value`` comment lines echoing the fully resolved config."""
    lines = []
    for key in sorted(_FIELD_NAMES):
        value = getattr(config, key)
        if isinstance(value, list):
            rendered = ",".join(repr(v) for v in value)
        else:
            rendered = repr(value)
        lines.append(f"# {key}={rendered}")
    return lines
