"""Network description and the synchronous fixed-step spiking engine."""

from __future__ import annotations

import logging
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, replace
from typing import Any

import numpy as np

from synaptic_delay.dynamics import (
    NeuronBank,
    NeuronBankState,
    SynapseBank,
    SynapseBankState,
    adex_step_bank,
    dpi_receive_bank,
    dpi_step_bank,
    steps_for,
)
from synaptic_delay.errors import ConfigurationError, NumericalDivergenceError
from synaptic_delay.models import (
    DEFAULT_DT,
    FloatArray,
    NeuronParams,
    SpikeTrain,
    SynapseParams,
    Trace,
)

logger = logging.getLogger(__name__)

NETWORK_SCHEMA_VERSION = "network_v1"
CAM_FAN_IN_LIMIT = 64


@dataclass(frozen=True, slots=True)
class Connection:
    """One synapse instance from a source or neuron onto a neuron."""

    pre: str
    post: str
    params: SynapseParams
    label: str = ""


@dataclass(frozen=True, slots=True)
class Network:
    neurons: tuple[tuple[str, NeuronParams], ...]
    synapses: tuple[Connection, ...]
    sources: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        ids = [neuron_id for neuron_id, _ in self.neurons] + list(self.sources)
        if len(set(ids)) != len(ids):
            raise ConfigurationError("Network ids must be unique.", details={"ids": ids})
        neuron_ids = set(self.neuron_ids)
        known = set(ids)
        for connection in self.synapses:
            if connection.pre not in known:
                raise ConfigurationError(
                    f"Synapse source {connection.pre!r} does not exist.",
                    details={"synapse": connection.label, "pre": connection.pre},
                )
            if connection.post not in neuron_ids:
                raise ConfigurationError(
                    f"Synapse target {connection.post!r} is not a neuron.",
                    details={"synapse": connection.label, "post": connection.post},
                )

    @property
    def neuron_ids(self) -> tuple[str, ...]:
        return tuple(neuron_id for neuron_id, _ in self.neurons)

    def neuron(self, neuron_id: str) -> NeuronParams:
        for candidate, params in self.neurons:
            if candidate == neuron_id:
                return params
        raise ConfigurationError(f"Unknown neuron {neuron_id!r}.", details={"neuron": neuron_id})

    def connection(self, label: str) -> Connection:
        for candidate in self.synapses:
            if candidate.label == label:
                return candidate
        raise ConfigurationError(f"Unknown synapse {label!r}.", details={"synapse": label})

    def fan_in(self, neuron_id: str) -> int:
        return len({c.pre for c in self.synapses if c.post == neuron_id})

    def topology(self) -> tuple[Any, ...]:
        return (
            self.neuron_ids,
            self.sources,
            tuple((c.pre, c.post, c.params.polarity) for c in self.synapses),
        )

    def with_synapse(self, label: str, **changes: Any) -> Network:
        """Return a copy with the labelled synapse's parameters replaced."""
        self.connection(label)
        synapses = tuple(
            replace(c, params=replace(c.params, **changes)) if c.label == label else c
            for c in self.synapses
        )
        return replace(self, synapses=synapses)

    def with_neuron(self, neuron_id: str, params: NeuronParams) -> Network:
        self.neuron(neuron_id)
        neurons = tuple(
            (candidate, params if candidate == neuron_id else current)
            for candidate, current in self.neurons
        )
        return replace(self, neurons=neurons)

    def without(self, labels: Iterable[str]) -> Network:
        dropped = set(labels)
        return replace(self, synapses=tuple(c for c in self.synapses if c.label not in dropped))

    def drifted(self, factor: float) -> Network:
        """Scale every time constant (membrane C, tau_w, synaptic tau) by ``factor``."""
        if factor <= 0:
            raise ValueError("drift factor must be > 0.")
        return Network(
            neurons=tuple((n, params.drifted(factor)) for n, params in self.neurons),
            synapses=tuple(replace(c, params=c.params.drifted(factor)) for c in self.synapses),
            sources=self.sources,
        )


@dataclass(frozen=True, slots=True, eq=False)
class SimResult:
    """Spike times per neuron plus optional baseline-relative traces."""

    spikes: dict[str, tuple[float, ...]]
    traces: dict[str, Trace]
    currents: dict[str, Trace]

    def count(self, neuron_id: str) -> int:
        return len(self.spikes[neuron_id])

    def spike_rows(self) -> list[dict[str, Any]]:
        return [
            {"neuron": neuron_id, "time": round(time, 6)}
            for neuron_id, times in self.spikes.items()
            for time in times
        ]

    def trace_rows(self) -> list[dict[str, Any]]:
        if not self.traces:
            return []
        first = next(iter(self.traces.values()))
        rows: list[dict[str, Any]] = []
        for index, time in enumerate(first.times.tolist()):
            row: dict[str, Any] = {"time": round(time, 6)}
            for neuron_id, trace in self.traces.items():
                row[neuron_id] = round(float(trace.values[index]), 6)
            rows.append(row)
        return rows


def simulate(
    net: Network,
    stimuli: Mapping[str, SpikeTrain],
    duration: float,
    dt: float = DEFAULT_DT,
    record: Iterable[str] = (),
    *,
    record_currents: bool = False,
) -> SimResult:
    return simulate_batch(
        [net],
        [stimuli],
        duration,
        dt,
        record,
        record_currents=record_currents,
    )[0]


def simulate_batch(
    networks: Sequence[Network],
    stimuli: Sequence[Mapping[str, SpikeTrain]],
    duration: float,
    dt: float = DEFAULT_DT,
    record: Iterable[str] = (),
    *,
    record_currents: bool = False,
) -> list[SimResult]:
    """Co-simulate same-topology networks, one stimulus map per batch element.

    A single network is broadcast across all stimulus maps. Each step delivers due
    spikes, steps every synapse, sums signed currents per neuron and steps every
    neuron; spikes emitted at step ``k`` reach their synapses at step ``k + 1``.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0.")
    if duration <= 0:
        raise ValueError("duration must be > 0.")
    if not stimuli:
        raise ValueError("At least one stimulus map is required.")
    nets = list(networks)
    if len(nets) == 1 and len(stimuli) > 1:
        nets = nets * len(stimuli)
    if len(nets) != len(stimuli):
        raise ValueError("networks and stimuli must have the same length.")

    base = nets[0]
    topology = base.topology()
    for net in nets[1:]:
        if net.topology() != topology:
            raise ConfigurationError("Batched networks must share one topology.")
    for neuron_id in base.neuron_ids:
        fan_in = base.fan_in(neuron_id)
        if fan_in > CAM_FAN_IN_LIMIT:
            logger.warning(
                "Neuron %s has fan-in %d above the %d-entry CAM limit.",
                neuron_id,
                fan_in,
                CAM_FAN_IN_LIMIT,
            )

    neuron_ids = base.neuron_ids
    neuron_index = {neuron_id: i for i, neuron_id in enumerate(neuron_ids)}
    record_ids = list(dict.fromkeys(record))
    for neuron_id in record_ids:
        if neuron_id not in neuron_index:
            raise ConfigurationError(
                f"Cannot record unknown neuron {neuron_id!r}.",
                details={"neuron": neuron_id},
            )
    record_index = np.array([neuron_index[n] for n in record_ids], dtype=np.int64)

    batch = len(nets)
    n_neurons = len(neuron_ids)
    n_syn = len(base.synapses)
    n_steps = steps_for(duration, dt)

    neuron_bank = NeuronBank.from_rows([[p for _, p in net.neurons] for net in nets], dt)
    synapse_bank = SynapseBank.from_rows([[c.params for c in net.synapses] for net in nets], dt)
    neuron_state = NeuronBankState.at_rest(neuron_bank)
    synapse_state = SynapseBankState.idle(synapse_bank)
    rest_V = neuron_state.V.copy()

    post_matrix = np.zeros((n_syn, n_neurons), dtype=np.float64)
    for s, connection in enumerate(base.synapses):
        post_matrix[s, neuron_index[connection.post]] = 1.0
    from_neuron = np.array([c.pre in neuron_index for c in base.synapses], dtype=np.bool_)
    pre_index = np.array([neuron_index.get(c.pre, 0) for c in base.synapses], dtype=np.int64)
    has_recurrent = bool(from_neuron.any())

    events = _source_events(base, stimuli, duration, dt, n_steps)
    logger.debug(
        "Simulating batch=%d neurons=%d synapses=%d steps=%d",
        batch,
        n_neurons,
        n_syn,
        n_steps,
    )

    traces = np.empty((batch, len(record_ids), n_steps), dtype=np.float64) if record_ids else None
    currents = (
        np.empty((batch, len(record_ids), n_steps), dtype=np.float64)
        if record_ids and record_currents
        else None
    )
    spike_steps: list[tuple[np.ndarray, np.ndarray, int]] = []
    spiked = np.zeros((batch, n_neurons), dtype=np.bool_)

    for k in range(n_steps):
        hits = None
        due = events.get(k)
        if due is not None:
            hits = np.zeros((batch, n_syn), dtype=np.bool_)
            hits[due[0], due[1]] = True
        if has_recurrent and spiked.any():
            recurrent_hits = spiked[:, pre_index] & from_neuron
            hits = recurrent_hits if hits is None else hits | recurrent_hits
        if hits is not None:
            dpi_receive_bank(synapse_state, synapse_bank, hits, k)
        dpi_step_bank(synapse_state, synapse_bank, k)
        I_syn = (synapse_state.I_out * synapse_bank.sign) @ post_matrix
        spiked = adex_step_bank(neuron_state, neuron_bank, I_syn, k, dt)

        if not (np.isfinite(neuron_state.V).all() and np.isfinite(I_syn).all()):
            _raise_divergence(neuron_state.V, I_syn, neuron_ids, k, dt)
        if traces is not None:
            traces[:, :, k] = neuron_state.V[:, record_index]
        if currents is not None:
            currents[:, :, k] = I_syn[:, record_index]
        if spiked.any():
            b_idx, n_idx = np.nonzero(spiked)
            spike_steps.append((b_idx, n_idx, k))

    per_element: list[dict[str, list[float]]] = [
        {neuron_id: [] for neuron_id in neuron_ids} for _ in range(batch)
    ]
    for b_idx, n_idx, k in spike_steps:
        time = (k + 1) * dt
        for b, n in zip(b_idx.tolist(), n_idx.tolist()):
            per_element[b][neuron_ids[n]].append(time)

    results: list[SimResult] = []
    for b in range(batch):
        trace_map: dict[str, Trace] = {}
        current_map: dict[str, Trace] = {}
        for r, neuron_id in enumerate(record_ids):
            if traces is not None:
                n = neuron_index[neuron_id]
                trace_map[neuron_id] = Trace(start=dt, dt=dt, values=traces[b, r] - rest_V[b, n])
            if currents is not None:
                current_map[neuron_id] = Trace(start=dt, dt=dt, values=currents[b, r].copy())
        results.append(
            SimResult(
                spikes={n: tuple(times) for n, times in per_element[b].items()},
                traces=trace_map,
                currents=current_map,
            )
        )
    return results


def _source_events(
    net: Network,
    stimuli: Sequence[Mapping[str, SpikeTrain]],
    duration: float,
    dt: float,
    n_steps: int,
) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    targets: dict[str, list[int]] = {source: [] for source in net.sources}
    for s, connection in enumerate(net.synapses):
        if connection.pre in targets:
            targets[connection.pre].append(s)

    collected: dict[int, tuple[list[int], list[int]]] = {}
    for b, stimulus in enumerate(stimuli):
        for source, train in stimulus.items():
            if source not in targets:
                raise ConfigurationError(
                    f"Stimulus refers to unknown source {source!r}.",
                    details={"source": source, "sources": list(net.sources)},
                )
            for time in train.times:
                if time >= duration:
                    raise ValueError(
                        f"Stimulus spike at {time} ms lies outside [0, {duration}) ms."
                    )
                # Spikes in the last half step land on the final step.
                step = min(steps_for(time, dt), n_steps - 1)
                batch_list, syn_list = collected.setdefault(step, ([], []))
                for s in targets[source]:
                    batch_list.append(b)
                    syn_list.append(s)
    return {
        step: (np.array(b_list, dtype=np.int64), np.array(s_list, dtype=np.int64))
        for step, (b_list, s_list) in collected.items()
    }


def _raise_divergence(
    V: FloatArray,
    I_syn: FloatArray,
    neuron_ids: tuple[str, ...],
    k: int,
    dt: float,
) -> None:
    bad = ~(np.isfinite(V) & np.isfinite(I_syn))
    b, n = (int(i) for i in np.argwhere(bad)[0])
    t = k * dt
    raise NumericalDivergenceError.at(
        "Simulation diverged", t=t, neuron=neuron_ids[n], batch_index=b
    )


def network_to_dict(net: Network) -> dict[str, Any]:
    return {
        "schema_version": NETWORK_SCHEMA_VERSION,
        "neurons": [{"id": n, "params": params.to_dict()} for n, params in net.neurons],
        "sources": list(net.sources),
        "synapses": [
            {"pre": c.pre, "post": c.post, "label": c.label, "params": c.params.to_dict()}
            for c in net.synapses
        ],
    }


def network_from_dict(raw: Mapping[str, Any]) -> Network:
    if raw.get("schema_version") != NETWORK_SCHEMA_VERSION:
        raise ValueError(f"Unsupported network schema_version: {raw.get('schema_version')}")
    try:
        neurons = tuple(
            (str(item["id"]), NeuronParams.from_mapping(item["params"])) for item in raw["neurons"]
        )
        synapses = tuple(
            Connection(
                pre=str(item["pre"]),
                post=str(item["post"]),
                label=str(item.get("label", "")),
                params=SynapseParams.from_mapping(item["params"]),
            )
            for item in raw["synapses"]
        )
    except KeyError as exc:
        raise ValueError(f"Network document is missing key {exc.args[0]!r}.") from exc
    return Network(neurons=neurons, synapses=synapses, sources=tuple(raw.get("sources", ())))
