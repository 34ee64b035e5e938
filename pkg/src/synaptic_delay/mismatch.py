"""Seeded device-mismatch sampling and population characterization."""

from __future__ import annotations

import logging
import math
import zlib
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any

import numpy as np

from synaptic_delay.delay import delay_response_batch
from synaptic_delay.metrics import METRIC_NAMES, extract_metrics
from synaptic_delay.models import (
    DEFAULT_DT,
    DelayElementConfig,
    DelayMetrics,
    NeuronParams,
    SpikeTrain,
    SynapseParams,
)

logger = logging.getLogger(__name__)

NEURON_KEYS = ("C", "g_L", "Delta_T", "tau_w", "a", "b", "t_refr")
SYNAPSE_KEYS = ("tau", "gain", "weight", "pulse_width")
SYNAPSE_SIDES = ("inh", "exc")

HISTOGRAM_WIDTHS = {
    "V_min": 20.0,
    "V_max": 10.0,
    "tau_inh": 2.0,
    "tau_exc": 2.0,
    "tau_delay": 2.0,
}

_MAX_RESAMPLES = 1000


class Distribution(str, Enum):
    LOGNORMAL = "lognormal"
    TRUNCATED_NORMAL = "truncated-normal"


def _allowed_keys() -> frozenset[str]:
    qualified = {f"{side}.{key}" for side in SYNAPSE_SIDES for key in SYNAPSE_KEYS}
    return frozenset(NEURON_KEYS) | frozenset(SYNAPSE_KEYS) | qualified


@dataclass(frozen=True, slots=True)
class MismatchSpec:
    """Per-parameter coefficients of variation.

    Synapse keys apply to both synapses of the pair unless qualified as ``inh.<key>``
    or ``exc.<key>``; a qualified key wins over the unqualified one.
    """

    cv_map: dict[str, float] = field(default_factory=dict)
    distribution: Distribution = Distribution.LOGNORMAL
    seed: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.distribution, Distribution):
            object.__setattr__(self, "distribution", Distribution(self.distribution))
        unknown = sorted(set(self.cv_map) - _allowed_keys())
        if unknown:
            raise ValueError(f"mismatch.cv_map has unknown parameters: {', '.join(unknown)}")
        for name, cv in self.cv_map.items():
            if not math.isfinite(cv) or cv < 0:
                raise ValueError(f"mismatch.cv_map[{name!r}] must be finite and >= 0.")
        if self.seed < 0:
            raise ValueError("mismatch.seed must be >= 0.")

    def cv_for(self, name: str, side: str | None = None) -> float:
        if side is not None:
            qualified = f"{side}.{name}"
            if qualified in self.cv_map:
                return float(self.cv_map[qualified])
        return float(self.cv_map.get(name, 0.0))

    def with_seed(self, seed: int) -> MismatchSpec:
        return replace(self, seed=seed)

    def to_dict(self) -> dict[str, Any]:
        return {
            "cv_map": dict(sorted(self.cv_map.items())),
            "distribution": self.distribution.value,
            "seed": self.seed,
        }

    @classmethod
    def from_mapping(cls, raw: Mapping[str, Any]) -> MismatchSpec:
        unknown = sorted(set(raw) - {"cv_map", "distribution", "seed"})
        if unknown:
            raise ValueError(f"mismatch has unknown keys: {', '.join(unknown)}")
        return cls(
            cv_map={str(k): float(v) for k, v in dict(raw.get("cv_map", {})).items()},
            distribution=Distribution(raw.get("distribution", Distribution.LOGNORMAL.value)),
            seed=int(raw.get("seed", 0)),
        )


def _multiplier(spec: MismatchSpec, instance: int, qualified_name: str, cv: float) -> float:
    if cv == 0:
        return 1.0
    rng = np.random.default_rng([spec.seed, instance, zlib.crc32(qualified_name.encode("utf-8"))])
    if spec.distribution is Distribution.LOGNORMAL:
        sigma = math.sqrt(math.log1p(cv * cv))
        return math.exp(sigma * float(rng.standard_normal()) - 0.5 * sigma * sigma)
    for _ in range(_MAX_RESAMPLES):
        candidate = 1.0 + cv * float(rng.standard_normal())
        if candidate > 0:
            return candidate
    raise ValueError(f"Could not draw a positive multiplier for {qualified_name} (cv={cv}).")


def _sample_neuron(nominal: NeuronParams, spec: MismatchSpec, instance: int) -> NeuronParams:
    changes = {
        key: getattr(nominal, key) * _multiplier(spec, instance, f"neuron.{key}", spec.cv_for(key))
        for key in NEURON_KEYS
        if spec.cv_for(key) > 0
    }
    return replace(nominal, **changes) if changes else nominal


def _sample_synapse(
    nominal: SynapseParams, side: str, spec: MismatchSpec, instance: int
) -> SynapseParams:
    changes: dict[str, float] = {}
    for key in SYNAPSE_KEYS:
        cv = spec.cv_for(key, side)
        if cv > 0:
            changes[key] = getattr(nominal, key) * _multiplier(spec, instance, f"{side}.{key}", cv)
    return replace(nominal, **changes) if changes else nominal


def sample_population(
    nominal_neuron: NeuronParams,
    nominal_delay: DelayElementConfig,
    n: int,
    spec: MismatchSpec,
) -> list[tuple[NeuronParams, DelayElementConfig]]:
    """Draw ``n`` instances; instance ``i`` depends only on (seed, i, parameter name)."""
    if n < 1:
        raise ValueError("n must be >= 1.")
    population: list[tuple[NeuronParams, DelayElementConfig]] = []
    for i in range(n):
        delay = replace(
            nominal_delay,
            inh=_sample_synapse(nominal_delay.inh, "inh", spec, i),
            exc=_sample_synapse(nominal_delay.exc, "exc", spec, i),
        )
        population.append((_sample_neuron(nominal_neuron, spec, i), delay))
    return population


@dataclass(frozen=True, slots=True)
class Histogram:
    """Fixed-width bins whose edges are multiples of the width."""

    metric: str
    width: float
    edges: tuple[float, ...]
    counts: tuple[int, ...]

    @property
    def mode_bin(self) -> tuple[float, float] | None:
        if not self.counts:
            return None
        index = int(np.argmax(self.counts))
        return self.edges[index], self.edges[index + 1]

    def rows(self) -> list[dict[str, Any]]:
        return [
            {
                "metric": self.metric,
                "bin_left": round(self.edges[i], 6),
                "bin_right": round(self.edges[i + 1], 6),
                "count": count,
            }
            for i, count in enumerate(self.counts)
        ]


def histogram(metric: str, values: Sequence[float], width: float) -> Histogram:
    if width <= 0:
        raise ValueError("histogram width must be > 0.")
    data = np.asarray(values, dtype=np.float64)
    if data.size == 0:
        return Histogram(metric=metric, width=width, edges=(), counts=())
    first = math.floor(float(data.min()) / width)
    last = math.floor(float(data.max()) / width)
    n_bins = last - first + 1
    index = np.clip(np.floor(data / width).astype(np.int64) - first, 0, n_bins - 1)
    counts = np.bincount(index, minlength=n_bins)
    edges = tuple((first + i) * width for i in range(n_bins + 1))
    return Histogram(metric=metric, width=width, edges=edges, counts=tuple(int(c) for c in counts))


def metric_is_valid(metrics: DelayMetrics, name: str) -> bool:
    if name in ("V_min", "tau_inh"):
        return metrics.valid_inh
    if name in ("V_max", "tau_exc"):
        return metrics.valid_exc
    return metrics.valid_delay


@dataclass(frozen=True, slots=True)
class PopulationCharacterization:
    metrics: tuple[DelayMetrics, ...]
    histograms: dict[str, Histogram]
    summary: dict[str, Any]

    def metric_rows(self) -> list[dict[str, Any]]:
        return [m.to_row(instance_id=i) for i, m in enumerate(self.metrics)]

    def histogram_rows(self) -> list[dict[str, Any]]:
        return [row for name in METRIC_NAMES for row in self.histograms[name].rows()]


def _describe(values: Sequence[float], hist: Histogram) -> dict[str, Any]:
    if not values:
        return {"n_valid": 0, "min": None, "max": None, "mean": None, "std": None, "mode_bin": None}
    data = np.asarray(values, dtype=np.float64)
    mode = hist.mode_bin
    return {
        "n_valid": int(data.size),
        "min": round(float(data.min()), 6),
        "max": round(float(data.max()), 6),
        "mean": round(float(data.mean()), 6),
        "std": round(float(data.std()), 6),
        "mode_bin": None if mode is None else [round(mode[0], 6), round(mode[1], 6)],
    }


def population_characterize(
    population: Sequence[tuple[NeuronParams, DelayElementConfig]],
    stim: SpikeTrain,
    duration: float,
    dt: float = DEFAULT_DT,
    *,
    chunk_size: int = 256,
) -> PopulationCharacterization:
    """Simulate every instance and summarize the five metric distributions."""
    if not population:
        raise ValueError("population must be nonempty.")
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1.")

    measured: list[DelayMetrics] = []
    for start in range(0, len(population), chunk_size):
        chunk = population[start : start + chunk_size]
        logger.info("Characterizing instances %d..%d", start, start + len(chunk) - 1)
        traces = delay_response_batch(
            [delay for _, delay in chunk],
            [neuron for neuron, _ in chunk],
            [stim],
            duration,
            dt,
        )
        measured.extend(extract_metrics(trace) for trace in traces)

    histograms: dict[str, Histogram] = {}
    per_metric: dict[str, Any] = {}
    for name in METRIC_NAMES:
        values = [m.value(name) for m in measured if metric_is_valid(m, name)]
        histograms[name] = histogram(name, values, HISTOGRAM_WIDTHS[name])
        per_metric[name] = _describe(values, histograms[name])

    no_excursion = [i for i, m in enumerate(measured) if not (m.valid_inh or m.valid_exc)]
    valid_count = sum(1 for m in measured if m.valid)
    summary = {
        "instances": len(measured),
        "valid_fraction": round(valid_count / len(measured), 6),
        "no_excursion_ids": no_excursion,
        "metrics": per_metric,
    }
    return PopulationCharacterization(
        metrics=tuple(measured),
        histograms=histograms,
        summary=summary,
    )
