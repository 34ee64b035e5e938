"""Typed error hierarchy for simulation, configuration and CLI behavior."""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Any

import numpy as np


def _plain(value: Any) -> Any:
    """Detail value as plain JSON: numpy unwrapped, tuples as lists, NaN/inf as None."""
    if isinstance(value, np.ndarray):
        value = value.tolist()
    elif isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, Mapping):
        return {str(key): _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    return value


@dataclass(slots=True)
class SynapticDelayError(Exception):
    """Simulator failure with a stable ``code``, a CLI ``exit_code`` and JSON-ready ``details``.

    ``details`` is normalized on construction so measured values taken straight from
    numpy traces (reach bands, best weights, spike times) serialize without conversion.
    """

    message: str
    details: dict[str, Any] = field(default_factory=dict)

    code: str = "synaptic_delay_error"
    exit_code: int = 1

    def __post_init__(self) -> None:
        Exception.__init__(self, self.message)
        self.details = _plain(self.details)

    def to_dict(self) -> dict[str, Any]:
        return {"code": self.code, "message": self.message, "details": self.details}


@dataclass(slots=True)
class NumericalDivergenceError(SynapticDelayError):
    """Non-finite or overflowing state; ``details`` names the neuron or synapse and ``t`` in ms."""

    code: str = "numerical_divergence"
    exit_code: int = 10

    @classmethod
    def at(
        cls,
        reason: str,
        *,
        t: float,
        neuron: str | None = None,
        synapse: str | None = None,
        **extra: Any,
    ) -> NumericalDivergenceError:
        if (neuron is None) == (synapse is None):
            raise ValueError("Exactly one of neuron or synapse is required.")
        kind, element = ("neuron", neuron) if neuron is not None else ("synapse", synapse)
        return cls(
            f"{reason} for {element} at t={t:.4f} ms.",
            details={kind: element, "t": t, **extra},
        )


@dataclass(slots=True)
class ConfigurationError(SynapticDelayError):
    code: str = "configuration_error"
    exit_code: int = 11


@dataclass(slots=True)
class UnreachableTargetError(SynapticDelayError):
    code: str = "unreachable_target"
    exit_code: int = 12


@dataclass(slots=True)
class MissingPresetError(SynapticDelayError):
    code: str = "missing_preset"
    exit_code: int = 13


@dataclass(slots=True)
class EmptyWindowError(SynapticDelayError):
    code: str = "empty_window"
    exit_code: int = 14
