"""Typed domain models and report schema skeletons."""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
from hashlib import sha256
from json import dumps
from typing import Any

import numpy as np
import numpy.typing as npt

FloatArray = npt.NDArray[np.float64]

DEFAULT_DT = 0.01
FLOOR_BELOW_LEAK = 320.0


def stable_hash(payload: Any) -> str:
    """Return the sha256 of a sorted, compact JSON rendering of ``payload``."""
    normalized = dumps(payload, sort_keys=True, separators=(",", ":"))
    return sha256(normalized.encode("utf-8")).hexdigest()


def _require_finite(owner: str, **values: float) -> None:
    for name, value in values.items():
        if not math.isfinite(value):
            raise ValueError(f"{owner}.{name} must be finite (got {value!r}).")


def _from_mapping(cls: Any, raw: Mapping[str, Any], owner: str) -> dict[str, Any]:
    known = {item.name for item in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ValueError(f"{owner} has unknown keys: {', '.join(unknown)}")
    return dict(raw)


class Polarity(str, Enum):
    EXCITATORY = "excitatory"
    INHIBITORY = "inhibitory"

    @property
    def sign(self) -> float:
        return 1.0 if self is Polarity.EXCITATORY else -1.0


@dataclass(frozen=True, slots=True)
class NeuronParams:
    """AdEx parameters in model units (pF, nS, mV, ms, pA).

    ``V_peak`` defaults to ``V_T + 5 * Delta_T`` and ``V_floor`` to ``E_L - 320``.
    """

    C: float
    g_L: float
    E_L: float = 0.0
    V_T: float = 20.0
    Delta_T: float = 2.0
    tau_w: float = 100.0
    a: float = 0.0
    b: float = 0.0
    V_r: float = 0.0
    V_peak: float = math.nan
    t_refr: float = 3.0
    I_dc: float = 0.0
    V_floor: float = math.nan
    exp_enabled: bool = True
    adapt_enabled: bool = True

    def __post_init__(self) -> None:
        if math.isnan(self.V_peak):
            object.__setattr__(self, "V_peak", self.V_T + 5.0 * self.Delta_T)
        if math.isnan(self.V_floor):
            object.__setattr__(self, "V_floor", self.E_L - FLOOR_BELOW_LEAK)
        _require_finite(
            "neuron",
            C=self.C,
            g_L=self.g_L,
            E_L=self.E_L,
            V_T=self.V_T,
            Delta_T=self.Delta_T,
            tau_w=self.tau_w,
            a=self.a,
            b=self.b,
            V_r=self.V_r,
            V_peak=self.V_peak,
            t_refr=self.t_refr,
            I_dc=self.I_dc,
            V_floor=self.V_floor,
        )
        if self.C <= 0:
            raise ValueError("neuron.C must be > 0.")
        if self.g_L <= 0:
            raise ValueError("neuron.g_L must be > 0.")
        if self.exp_enabled and self.Delta_T <= 0:
            raise ValueError("neuron.Delta_T must be > 0 when the exponential term is enabled.")
        if self.adapt_enabled and self.tau_w <= 0:
            raise ValueError("neuron.tau_w must be > 0 when adaptation is enabled.")
        if not (self.V_floor < self.E_L < self.V_T < self.V_peak):
            raise ValueError("neuron potentials must satisfy V_floor < E_L < V_T < V_peak.")
        if self.t_refr < 0:
            raise ValueError("neuron.t_refr must be >= 0.")

    @property
    def rest_potential(self) -> float:
        """Fixed point of the subthreshold dynamics (exponential term neglected)."""
        conductance = self.g_L + (self.a if self.adapt_enabled else 0.0)
        return self.E_L + self.I_dc / conductance

    def drifted(self, factor: float) -> NeuronParams:
        return replace(self, C=self.C * factor, tau_w=self.tau_w * factor)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_mapping(cls, raw: Mapping[str, Any]) -> NeuronParams:
        return cls(**_from_mapping(cls, raw, "neuron"))


@dataclass(frozen=True, slots=True)
class NeuronState:
    V: float
    w: float = 0.0
    refr_until: float = -math.inf
    last_spike: float | None = None

    @classmethod
    def at_rest(cls, params: NeuronParams) -> NeuronState:
        v_rest = params.rest_potential
        w_rest = params.a * (v_rest - params.E_L) if params.adapt_enabled else 0.0
        return cls(V=v_rest, w=w_rest)


@dataclass(frozen=True, slots=True)
class SynapseParams:
    """DPI synapse: ``tau`` in ms, ``gain`` = I_th/I_tau, ``weight`` in pA."""

    tau: float
    gain: float = 1.0
    weight: float = 0.0
    pulse_width: float = 1.0
    polarity: Polarity = Polarity.EXCITATORY

    def __post_init__(self) -> None:
        if not isinstance(self.polarity, Polarity):
            object.__setattr__(self, "polarity", Polarity(self.polarity))
        _require_finite(
            "synapse",
            tau=self.tau,
            gain=self.gain,
            weight=self.weight,
            pulse_width=self.pulse_width,
        )
        if self.tau <= 0:
            raise ValueError("synapse.tau must be > 0.")
        if self.gain <= 0:
            raise ValueError("synapse.gain must be > 0.")
        if self.weight < 0:
            raise ValueError("synapse.weight must be >= 0.")
        if self.pulse_width <= 0:
            raise ValueError("synapse.pulse_width must be > 0.")

    @property
    def amplitude(self) -> float:
        """Steady-state output current for a held input pulse."""
        return self.gain * self.weight

    def drifted(self, factor: float) -> SynapseParams:
        return replace(self, tau=self.tau * factor)

    def to_dict(self) -> dict[str, Any]:
        payload = asdict(self)
        payload["polarity"] = self.polarity.value
        return payload

    @classmethod
    def from_mapping(cls, raw: Mapping[str, Any]) -> SynapseParams:
        return cls(**_from_mapping(cls, raw, "synapse"))


@dataclass(frozen=True, slots=True)
class SynapseState:
    I_out: float = 0.0
    drive_until: float = -math.inf

    def __post_init__(self) -> None:
        if self.I_out < 0:
            raise ValueError("synapse state I_out must be >= 0.")


@dataclass(frozen=True, slots=True)
class DelayElementConfig:
    """Inhibitory (fast) plus excitatory (slow) synapse pair driving one neuron."""

    inh: SynapseParams
    exc: SynapseParams
    n_stim_spikes: int = 4
    stim_window: float = 20.0

    def __post_init__(self) -> None:
        if self.inh.polarity is not Polarity.INHIBITORY:
            raise ValueError("delay.inh must be an inhibitory synapse.")
        if self.exc.polarity is not Polarity.EXCITATORY:
            raise ValueError("delay.exc must be an excitatory synapse.")
        if self.n_stim_spikes < 1:
            raise ValueError("delay.n_stim_spikes must be >= 1.")
        if self.stim_window < 0:
            raise ValueError("delay.stim_window must be >= 0.")

    @property
    def w_inh(self) -> float:
        return self.inh.weight

    @property
    def w_exc(self) -> float:
        return self.exc.weight

    def with_weights(
        self, *, w_inh: float | None = None, w_exc: float | None = None
    ) -> DelayElementConfig:
        return replace(
            self,
            inh=self.inh if w_inh is None else replace(self.inh, weight=w_inh),
            exc=self.exc if w_exc is None else replace(self.exc, weight=w_exc),
        )

    def drifted(self, factor: float) -> DelayElementConfig:
        return replace(self, inh=self.inh.drifted(factor), exc=self.exc.drifted(factor))

    def to_dict(self) -> dict[str, Any]:
        return {
            "inh": self.inh.to_dict(),
            "exc": self.exc.to_dict(),
            "n_stim_spikes": self.n_stim_spikes,
            "stim_window": self.stim_window,
        }

    @classmethod
    def from_mapping(cls, raw: Mapping[str, Any]) -> DelayElementConfig:
        payload = _from_mapping(cls, raw, "delay")
        inh = dict(payload.pop("inh"))
        exc = dict(payload.pop("exc"))
        inh.setdefault("polarity", Polarity.INHIBITORY.value)
        exc.setdefault("polarity", Polarity.EXCITATORY.value)
        return cls(
            inh=SynapseParams.from_mapping(inh),
            exc=SynapseParams.from_mapping(exc),
            **payload,
        )


@dataclass(frozen=True, slots=True)
class SpikeTrain:
    times: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        previous = -math.inf
        for value in self.times:
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"Spike times must be finite and >= 0 (got {value!r}).")
            if value <= previous:
                raise ValueError("Spike times must be strictly increasing.")
            previous = value

    @classmethod
    def from_iterable(cls, values: Iterable[float]) -> SpikeTrain:
        return cls(times=tuple(float(value) for value in values))

    def shifted(self, offset: float) -> SpikeTrain:
        return SpikeTrain(times=tuple(value + offset for value in self.times))

    def as_array(self) -> FloatArray:
        return np.asarray(self.times, dtype=np.float64)

    def __len__(self) -> int:
        return len(self.times)


@dataclass(frozen=True, slots=True)
class PulseSpec:
    pulse_dur: float = 20.0
    n_spikes: int = 11
    ipi: float = 0.0
    noise_frac: float = 0.0
    seed: int | tuple[int, ...] = 0

    def __post_init__(self) -> None:
        if self.pulse_dur <= 0:
            raise ValueError("pulse_dur must be > 0.")
        if self.n_spikes < 2:
            raise ValueError("n_spikes must be >= 2.")
        if self.ipi < 0:
            raise ValueError("ipi must be >= 0.")
        if not (0.0 <= self.noise_frac <= 1.0):
            raise ValueError("noise_frac must be in [0, 1].")

    @property
    def nominal_isi(self) -> float:
        return self.pulse_dur / (self.n_spikes - 1)


@dataclass(frozen=True, slots=True, eq=False)
class Trace:
    """Uniformly sampled signal; sample ``i`` sits at ``start + i * dt``."""

    start: float
    dt: float
    values: FloatArray

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ValueError("trace dt must be > 0.")

    @property
    def times(self) -> FloatArray:
        return self.start + self.dt * np.arange(self.values.size, dtype=np.float64)

    def window_mask(self, lo: float, hi: float) -> npt.NDArray[np.bool_]:
        times = self.times
        return (times >= lo) & (times < hi)

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True, slots=True)
class DelayMetrics:
    V_min: float
    V_max: float
    tau_inh: float
    tau_exc: float
    tau_delay: float
    tau_delay_alt: float
    t_min: float
    t_max: float
    inh_onset: float
    exc_onset: float
    valid_inh: bool
    valid_exc: bool

    @property
    def valid_delay(self) -> bool:
        return self.valid_inh and self.valid_exc

    @property
    def valid(self) -> bool:
        return self.valid_delay

    @property
    def valid_mask(self) -> str:
        flags = (self.valid_inh, self.valid_exc, self.valid_delay)
        return "".join("1" if flag else "0" for flag in flags)

    def value(self, name: str) -> float:
        return float(getattr(self, name))

    def to_row(self, instance_id: int | None = None) -> dict[str, Any]:
        row: dict[str, Any] = {}
        if instance_id is not None:
            row["instance_id"] = instance_id
        for name in ("V_min", "V_max", "tau_inh", "tau_exc", "tau_delay", "tau_delay_alt"):
            value = float(getattr(self, name))
            row[name] = None if math.isnan(value) else round(value, 6)
        row["valid_mask"] = self.valid_mask
        return row


class Verdict(str, Enum):
    CORRECT = "correct"
    FALSE_POSITIVE = "false-positive"
    FALSE_NEGATIVE = "false-negative"


@dataclass(frozen=True, slots=True)
class ClassificationOutcome:
    target_ipi: float
    ln4_counts: dict[float, int]
    ln3_counts: dict[float, int] = field(default_factory=dict)
    false_positive_ipis: tuple[float, ...] = ()
    missed_target: bool = False

    @property
    def verdict(self) -> Verdict:
        """Single label; a trial with both error kinds reads as false-positive (see ``errors``)."""
        if self.false_positive_ipis:
            return Verdict.FALSE_POSITIVE
        if self.missed_target:
            return Verdict.FALSE_NEGATIVE
        return Verdict.CORRECT

    @property
    def errors(self) -> tuple[Verdict, ...]:
        kinds: list[Verdict] = []
        if self.false_positive_ipis:
            kinds.append(Verdict.FALSE_POSITIVE)
        if self.missed_target:
            kinds.append(Verdict.FALSE_NEGATIVE)
        return tuple(kinds)

    @property
    def correct(self) -> bool:
        return self.verdict is Verdict.CORRECT


@dataclass(frozen=True, slots=True)
class ExperimentReport:
    experiment: str
    config: dict[str, Any]
    config_hash: str
    provenance: dict[str, Any]
    tables: dict[str, list[dict[str, Any]]]
    summary: dict[str, Any]
    schema_version: str = "experiment_report_v1"

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)
