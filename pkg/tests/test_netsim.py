from __future__ import annotations

import logging

import numpy as np
import pytest

from synaptic_delay.errors import ConfigurationError
from synaptic_delay.models import NeuronParams, Polarity, SpikeTrain, SynapseParams
from synaptic_delay.netsim import (
    CAM_FAN_IN_LIMIT,
    Connection,
    Network,
    network_from_dict,
    network_to_dict,
    simulate,
    simulate_batch,
)

QUIET = NeuronParams(C=1.0, g_L=1.0, V_T=20.0, exp_enabled=False, adapt_enabled=False)
FIRING = NeuronParams(C=1.0, g_L=1.0, V_T=20.0, Delta_T=2.0, V_peak=30.0)
DRIVE = SynapseParams(tau=3.0, gain=10.0, weight=8.0)


def _chain() -> Network:
    return Network(
        neurons=(("A", FIRING), ("B", FIRING)),
        synapses=(
            Connection(pre="in", post="A", params=DRIVE, label="in->A"),
            Connection(
                pre="A",
                post="B",
                params=SynapseParams(tau=3.0, gain=10.0, weight=20.0),
                label="A->B",
            ),
        ),
        sources=("in",),
    )


def _burst(count: int = 11, start: float = 0.0) -> SpikeTrain:
    return SpikeTrain.from_iterable(start + 2.0 * i for i in range(count))


@pytest.mark.unit
def test_network_rejects_duplicate_ids() -> None:
    with pytest.raises(ConfigurationError, match="unique"):
        Network(neurons=(("A", QUIET),), synapses=(), sources=("A",))


@pytest.mark.unit
def test_network_rejects_missing_presynaptic_unit() -> None:
    with pytest.raises(ConfigurationError) as excinfo:
        Network(
            neurons=(("A", QUIET),),
            synapses=(Connection(pre="ghost", post="A", params=DRIVE, label="g"),),
        )
    assert excinfo.value.details["pre"] == "ghost"


@pytest.mark.unit
def test_network_rejects_synapse_onto_source() -> None:
    with pytest.raises(ConfigurationError, match="not a neuron"):
        Network(
            neurons=(("A", QUIET),),
            synapses=(Connection(pre="A", post="in", params=DRIVE, label="x"),),
            sources=("in",),
        )


@pytest.mark.unit
def test_unstimulated_trace_stays_at_zero() -> None:
    net = Network(neurons=(("A", QUIET),), synapses=(), sources=("in",))
    result = simulate(net, {}, 20.0, record=["A"])
    trace = result.traces["A"]
    assert len(trace) == 2000
    assert trace.start == pytest.approx(0.01)
    assert np.abs(trace.values).max() < 1e-9
    assert result.count("A") == 0


@pytest.mark.integration
def test_spikes_propagate_downstream_on_the_step_grid() -> None:
    result = simulate(_chain(), {"in": _burst()}, 40.0, record=["A", "B"])
    assert result.count("A") > 0
    assert result.count("B") > 0
    assert result.spikes["B"][0] > result.spikes["A"][0]
    for time in result.spikes["A"]:
        assert round(time / 0.01) == pytest.approx(time / 0.01, abs=1e-6)


@pytest.mark.integration
def test_recorded_voltage_respects_floor_and_peak() -> None:
    result = simulate(_chain(), {"in": _burst()}, 40.0, record=["A"])
    values = result.traces["A"].values
    rest = FIRING.rest_potential
    assert values.max() <= FIRING.V_peak - rest
    assert values.min() >= FIRING.V_floor - rest


@pytest.mark.integration
def test_batch_matches_individual_runs() -> None:
    stimuli = [{"in": _burst()}, {"in": _burst(count=6, start=5.0)}]
    batched = simulate_batch([_chain()], stimuli, 40.0)
    for stimulus, result in zip(stimuli, batched):
        assert result.spikes == simulate(_chain(), stimulus, 40.0).spikes


@pytest.mark.integration
def test_batch_with_parameter_variants_keeps_input_order() -> None:
    weak = _chain().with_synapse("in->A", weight=0.5)
    results = simulate_batch([_chain(), weak], [{"in": _burst()}, {"in": _burst()}], 40.0)
    assert results[0].count("A") > 0
    assert results[1].count("A") == 0


@pytest.mark.unit
def test_batch_rejects_mixed_topologies() -> None:
    pruned = _chain().without(["A->B"])
    with pytest.raises(ConfigurationError, match="topology"):
        simulate_batch([_chain(), pruned], [{}, {}], 5.0)


@pytest.mark.unit
def test_unknown_source_and_record_ids_are_rejected() -> None:
    with pytest.raises(ConfigurationError, match="unknown source"):
        simulate(_chain(), {"nope": _burst()}, 40.0)
    with pytest.raises(ConfigurationError, match="unknown neuron"):
        simulate(_chain(), {}, 5.0, record=["C"])


@pytest.mark.unit
def test_stimulus_outside_duration_is_invalid_input() -> None:
    with pytest.raises(ValueError, match="outside"):
        simulate(_chain(), {"in": SpikeTrain(times=(5.0,))}, 5.0)


@pytest.mark.unit
def test_large_fan_in_logs_warning(caplog: pytest.LogCaptureFixture) -> None:
    sources = tuple(f"s{i}" for i in range(CAM_FAN_IN_LIMIT + 1))
    net = Network(
        neurons=(("A", QUIET),),
        synapses=tuple(
            Connection(pre=s, post="A", params=DRIVE, label=f"{s}->A") for s in sources
        ),
        sources=sources,
    )
    with caplog.at_level(logging.WARNING, logger="synaptic_delay.netsim"):
        simulate(net, {}, 1.0)
    assert "CAM limit" in caplog.text


@pytest.mark.unit
def test_drift_scales_capacitance_and_synaptic_tau() -> None:
    drifted = _chain().drifted(1.1)
    assert drifted.neuron("A").C == pytest.approx(1.1)
    assert drifted.connection("A->B").params.tau == pytest.approx(3.3)
    assert drifted.topology() == _chain().topology()


@pytest.mark.unit
def test_network_document_round_trip() -> None:
    payload = network_to_dict(_chain())
    assert payload["schema_version"] == "network_v1"
    assert payload["synapses"][0]["params"]["polarity"] == Polarity.EXCITATORY.value
    assert network_from_dict(payload) == _chain()


@pytest.mark.unit
def test_network_document_requires_known_version() -> None:
    with pytest.raises(ValueError, match="schema_version"):
        network_from_dict({"schema_version": "network_v0", "neurons": [], "synapses": []})


@pytest.mark.integration
def test_result_rows_are_flat_records() -> None:
    result = simulate(_chain(), {"in": _burst()}, 40.0, record=["A", "B"])
    spike_rows = result.spike_rows()
    assert spike_rows and set(spike_rows[0]) == {"neuron", "time"}
    trace_rows = result.trace_rows()
    assert len(trace_rows) == 4000
    assert set(trace_rows[0]) == {"time", "A", "B"}


@pytest.mark.integration
def test_spike_in_final_half_step_still_reaches_the_synapse() -> None:
    net = Network(
        neurons=(("A", QUIET),),
        synapses=(Connection(pre="in", post="A", params=DRIVE, label="in->A"),),
        sources=("in",),
    )
    late = SpikeTrain.from_iterable([19.996])
    result = simulate(net, {"in": late}, 20.0, record=["A"], record_currents=True)
    current = result.currents["A"].values
    assert len(current) == 2000
    assert np.count_nonzero(current) == 1
    assert current[-1] > 0.0
