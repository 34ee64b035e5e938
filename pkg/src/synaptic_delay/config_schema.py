"""Experiment config v1 validation and deterministic serialization helpers."""

from __future__ import annotations

import json
import logging
import math
from collections.abc import Mapping
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from synaptic_delay.models import DEFAULT_DT, stable_hash
from synaptic_delay.presets import CRICKET_VARIANTS, PresetBook, load_presets

logger = logging.getLogger(__name__)

CONFIG_SCHEMA_VERSION = "v1"

_TUPLE_FIELDS = {
    "ipi_set",
    "noise_levels",
    "boundary_ln3_weights",
    "boundary_ln4_weights",
    "delay_sweep_w_inh",
    "delay_sweep_w_exc",
    "stim_counts",
}


@dataclass(frozen=True, slots=True)
class ExperimentConfig:
    dt: float = DEFAULT_DT
    trials: int = 50
    ipi_set: tuple[float, ...] = (0.0, 10.0, 20.0, 30.0, 40.0, 50.0)
    noise_levels: tuple[float, ...] = (0.0, 0.1, 0.2, 0.5)
    target_ipi: float = 20.0
    seed: int = 1
    drift_factor: float = 1.0
    population_size: int = 256
    cricket_variant: str = "central"
    boundary_ln3_weights: tuple[float, ...] = (70.0, 80.0, 90.0, 100.0)
    boundary_ln4_weights: tuple[float, ...] = (12.0, 13.0, 14.0)
    delay_sweep_w_inh: tuple[float, ...] = ()
    delay_sweep_w_exc: tuple[float, ...] = ()
    stim_counts: tuple[int, ...] = (1, 2, 3, 4, 5, 6)
    presets: PresetBook = field(default_factory=load_presets)

    def __post_init__(self) -> None:
        if not math.isfinite(self.dt) or self.dt <= 0:
            raise ValueError("experiment.dt must be > 0.")
        if self.trials < 1:
            raise ValueError("experiment.trials must be >= 1.")
        if self.population_size < 1:
            raise ValueError("experiment.population_size must be >= 1.")
        if not math.isfinite(self.drift_factor) or self.drift_factor <= 0:
            raise ValueError("experiment.drift_factor must be > 0.")
        if self.seed < 0:
            raise ValueError("experiment.seed must be >= 0.")
        if self.cricket_variant not in CRICKET_VARIANTS:
            raise ValueError(f"Unsupported cricket_variant: {self.cricket_variant}")
        for name in ("ipi_set", "noise_levels", "boundary_ln3_weights", "boundary_ln4_weights"):
            if not getattr(self, name):
                raise ValueError(f"experiment.{name} must be nonempty.")
        if any(ipi < 0 for ipi in self.ipi_set):
            raise ValueError("experiment.ipi_set values must be >= 0.")
        if self.target_ipi not in self.ipi_set:
            raise ValueError("experiment.target_ipi must be one of ipi_set.")
        if any(not 0.0 <= level <= 1.0 for level in self.noise_levels):
            raise ValueError("experiment.noise_levels must lie in [0, 1].")
        if not self.stim_counts or any(count < 1 for count in self.stim_counts):
            raise ValueError("experiment.stim_counts must be nonempty and >= 1.")

    def with_overrides(self, **changes: Any) -> ExperimentConfig:
        """Apply CLI-style overrides; ``None`` values are ignored."""
        applied = {key: value for key, value in changes.items() if value is not None}
        return replace(self, **applied) if applied else self

    def to_dict(self) -> dict[str, Any]:
        payload: dict[str, Any] = {}
        for item in fields(self):
            value = getattr(self, item.name)
            if item.name == "presets":
                payload[item.name] = value.to_dict()["presets"]
            elif item.name in _TUPLE_FIELDS:
                payload[item.name] = list(value)
            else:
                payload[item.name] = value
        return payload

    @property
    def config_hash(self) -> str:
        return stable_hash(self.to_dict())


def experiment_from_mapping(raw: Mapping[str, Any], presets: PresetBook) -> ExperimentConfig:
    known = {item.name for item in fields(ExperimentConfig)} - {"presets"}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ValueError(f"config.experiment has unknown keys: {', '.join(unknown)}")
    values: dict[str, Any] = {}
    for key, value in raw.items():
        if key in _TUPLE_FIELDS:
            if not isinstance(value, list):
                raise ValueError(f"config.experiment.{key} must be a list.")
            cast = int if key == "stim_counts" else float
            values[key] = tuple(cast(v) for v in value)
        else:
            values[key] = value
    return ExperimentConfig(presets=presets, **values)


def validate_config_payload(raw: dict[str, Any]) -> ExperimentConfig:
    schema_version = raw.get("schema_version")
    if not isinstance(schema_version, str) or not schema_version:
        raise ValueError("config.schema_version must be a non-empty string.")
    if schema_version != CONFIG_SCHEMA_VERSION:
        raise ValueError(f"Unsupported schema_version: {schema_version}")

    unknown = sorted(set(raw) - {"schema_version", "presets", "experiment"})
    if unknown:
        raise ValueError(f"config has unknown keys: {', '.join(unknown)}")
    presets = raw.get("presets", {})
    if not isinstance(presets, dict):
        raise ValueError("config.presets must be an object.")
    experiment = raw.get("experiment", {})
    if not isinstance(experiment, dict):
        raise ValueError("config.experiment must be an object.")
    return experiment_from_mapping(experiment, load_presets().merged(presets))


def read_config_file(path: Path) -> ExperimentConfig:
    raw = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise ValueError("Configuration file must contain a top-level object.")
    return validate_config_payload(raw)
