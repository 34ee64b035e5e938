from __future__ import annotations

import json

import numpy as np
import pytest

from synaptic_delay.delay import (
    NEURON_ID,
    SOURCE_ID,
    configure_delay,
    configure_delays,
    delay_network,
    delay_response,
    delay_response_batch,
    psc_trace,
    summed_psc,
)
from synaptic_delay.errors import UnreachableTargetError
from synaptic_delay.metrics import extract_metrics
from synaptic_delay.models import SpikeTrain, SynapseState
from synaptic_delay.netsim import simulate
from synaptic_delay.presets import load_presets
from synaptic_delay.stimgen import delay_stim

PRESETS = load_presets()
CANONICAL = PRESETS.delay("delay-characterization")
SATURATED = PRESETS.delay("delay-config")
STIM = delay_stim(4, 20.0)


@pytest.mark.integration
def test_canonical_response_is_biphasic_within_delay_band() -> None:
    trace = delay_response(CANONICAL.delay, CANONICAL.neuron, STIM, CANONICAL.duration)
    metrics = extract_metrics(trace)
    assert metrics.valid
    assert metrics.t_min < metrics.t_max
    assert 22.0 <= metrics.tau_delay <= 51.0
    assert 6.0 <= metrics.tau_inh <= 47.0
    assert metrics.V_max == pytest.approx(104.9, abs=1.0)
    assert metrics.tau_delay == pytest.approx(31.5, abs=1.0)


@pytest.mark.integration
def test_response_trace_starts_before_the_stimulus() -> None:
    trace = delay_response(CANONICAL.delay, CANONICAL.neuron, STIM, CANONICAL.duration)
    assert trace.start == pytest.approx(0.01 - 10.0)
    assert np.abs(trace.values[trace.window_mask(-10.0, 0.0)]).max() < 1e-9


@pytest.mark.integration
def test_canonical_element_stays_subthreshold() -> None:
    result = simulate(
        delay_network(CANONICAL.delay, CANONICAL.neuron),
        {SOURCE_ID: STIM},
        CANONICAL.duration,
    )
    assert result.count(NEURON_ID) == 0


@pytest.mark.unit
def test_empty_stimulus_gives_flat_trace() -> None:
    trace = delay_response(CANONICAL.delay, CANONICAL.neuron, SpikeTrain(), 50.0)
    assert np.abs(trace.values).max() < 1e-9


@pytest.mark.integration
def test_saturated_inhibition_rails_at_the_floor() -> None:
    trace = delay_response(SATURATED.delay, SATURATED.neuron, STIM, SATURATED.duration)
    floor = SATURATED.neuron.V_floor - SATURATED.neuron.rest_potential
    assert trace.values.min() == pytest.approx(floor, abs=1e-6)
    assert int(np.count_nonzero(trace.values <= floor + 1e-6)) > 100
    assert trace.values.max() > 0.0


@pytest.mark.unit
def test_net_current_is_inhibitory_during_stimulus_then_excitatory() -> None:
    trace = psc_trace(CANONICAL.delay, STIM, CANONICAL.duration)
    during = trace.values[trace.times <= 20.0]
    assert during.max() <= 1e-9
    peak = int(np.argmax(trace.values))
    assert trace.values[peak] > 0.0
    assert trace.times[peak] > 20.0


@pytest.mark.unit
def test_net_current_scales_linearly_with_both_weights() -> None:
    doubled = CANONICAL.delay.with_weights(
        w_inh=2 * CANONICAL.delay.w_inh,
        w_exc=2 * CANONICAL.delay.w_exc,
    )
    base = psc_trace(CANONICAL.delay, STIM, 100.0)
    scaled = psc_trace(doubled, STIM, 100.0)
    assert np.allclose(scaled.values, 2 * base.values, rtol=1e-9, atol=1e-9)


@pytest.mark.unit
def test_batch_requires_matching_lengths() -> None:
    with pytest.raises(ValueError, match="matching lengths"):
        delay_response_batch(
            [CANONICAL.delay] * 3,
            [CANONICAL.neuron] * 2,
            [STIM],
            50.0,
        )
    assert delay_response_batch([], [CANONICAL.neuron], [STIM], 50.0) == []


@pytest.mark.unit
def test_stimulus_must_fit_in_response_window() -> None:
    with pytest.raises(ValueError, match="outside"):
        delay_response(CANONICAL.delay, CANONICAL.neuron, STIM, 20.0)


@pytest.mark.integration
def test_configure_delay_returns_base_when_already_on_target() -> None:
    metrics = extract_metrics(
        delay_response(SATURATED.delay, SATURATED.neuron, STIM, SATURATED.duration)
    )
    found = configure_delay(metrics.tau_inh, metrics.V_max, SATURATED.delay, SATURATED.neuron)
    assert found == SATURATED.delay


@pytest.mark.integration
def test_configure_delay_meets_inhibition_and_peak_targets() -> None:
    found = configure_delay(70.0, 60.0, SATURATED.delay, SATURATED.neuron)
    metrics = extract_metrics(
        delay_response(found, SATURATED.neuron, STIM, SATURATED.duration)
    )
    assert abs(metrics.tau_inh - 70.0) <= 5.0
    assert abs(metrics.V_max - 60.0) <= 10.0
    assert 50.0 <= metrics.tau_inh <= 90.0
    assert 20.0 <= metrics.V_max <= 110.0


@pytest.mark.integration
def test_configure_delay_rejects_unreachable_inhibition() -> None:
    with pytest.raises(UnreachableTargetError) as excinfo:
        configure_delay(500.0, 60.0, SATURATED.delay, SATURATED.neuron)
    details = excinfo.value.details
    assert details["metric"] == "tau_inh"
    assert details["targets"] == [[500.0, 60.0]]
    low, high = details["reachable"]["tau_inh"]
    assert type(low) is float and low <= high < 500.0
    json.dumps(excinfo.value.to_dict(), allow_nan=False)


@pytest.mark.unit
def test_summed_psc_subtracts_inhibition() -> None:
    inh = SynapseState(I_out=30.0)
    exc = SynapseState(I_out=12.0)
    assert summed_psc(inh, exc) == pytest.approx(-18.0)
    assert summed_psc(inh, exc, extra_exc=20.0) == pytest.approx(2.0)
    assert summed_psc(SynapseState(), SynapseState()) == 0.0


@pytest.mark.integration
def test_configure_delays_fits_onset_to_onset_delay() -> None:
    found = configure_delays(
        [(90.0, 80.0), (72.0, 80.0)],
        SATURATED.delay,
        SATURATED.neuron,
        timing_metric="tau_delay",
        tau_tolerance=2.0,
    )
    traces = delay_response_batch(found, [SATURATED.neuron], [STIM], SATURATED.duration)
    measured = [extract_metrics(trace) for trace in traces]
    assert [m.tau_delay for m in measured] == [
        pytest.approx(90.0, abs=2.0),
        pytest.approx(72.0, abs=2.0),
    ]
    assert all(abs(m.V_max - 80.0) <= 10.0 for m in measured)


@pytest.mark.unit
def test_configure_delays_rejects_unknown_timing_metric() -> None:
    with pytest.raises(ValueError, match="timing_metric"):
        configure_delays([(70.0, 60.0)], SATURATED.delay, SATURATED.neuron, timing_metric="V_min")
