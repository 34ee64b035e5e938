"""Builders for the cricket phonotaxis circuit and polychronous pattern detectors."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import replace

from synaptic_delay.delay import configure_delays, delay_response_batch
from synaptic_delay.errors import ConfigurationError
from synaptic_delay.metrics import extract_metrics
from synaptic_delay.models import DEFAULT_DT, SpikeTrain
from synaptic_delay.netsim import Connection, Network
from synaptic_delay.presets import CricketPresets, DelayPreset
from synaptic_delay.stimgen import delay_stim

logger = logging.getLogger(__name__)

AN1 = "AN1"
LN2 = "LN2"
LN3 = "LN3"
LN4 = "LN4"

AN1_LN2 = "AN1->LN2"
AN1_LN3 = "AN1->LN3"
DELAY_INH = "LN2->LN3:inh"
DELAY_EXC = "LN2->LN3:exc"
LN3_LN4 = "LN3->LN4"
LN2_LN4 = "LN2->LN4:inh"

# ms; polychronous edges are fitted on tau_delay within this band.
EDGE_DELAY_TOLERANCE = 2.0


def build_cricket_circuit(
    presets: CricketPresets,
    *,
    ln3_input_weight: float | None = None,
    ln4_excitation_weight: float | None = None,
    include_delay: bool = True,
    drift_factor: float = 1.0,
) -> Network:
    """AN1 drives LN2 and LN3; LN2 reaches LN3 through the delay element; LN3 excites LN4
    while LN2 inhibits it subtractively."""
    ln3_input = presets.ln3_input
    if ln3_input_weight is not None:
        ln3_input = replace(ln3_input, weight=ln3_input_weight)
    ln4_excitation = presets.ln4_excitation
    if ln4_excitation_weight is not None:
        ln4_excitation = replace(ln4_excitation, weight=ln4_excitation_weight)

    synapses = [
        Connection(pre=AN1, post=LN2, params=presets.ln2_input, label=AN1_LN2),
        Connection(pre=AN1, post=LN3, params=ln3_input, label=AN1_LN3),
    ]
    if include_delay:
        synapses += [
            Connection(pre=LN2, post=LN3, params=presets.ln3_delay.inh, label=DELAY_INH),
            Connection(pre=LN2, post=LN3, params=presets.ln3_delay.exc, label=DELAY_EXC),
        ]
    synapses += [
        Connection(pre=LN3, post=LN4, params=ln4_excitation, label=LN3_LN4),
        Connection(pre=LN2, post=LN4, params=presets.ln4_inhibition, label=LN2_LN4),
    ]
    network = Network(
        neurons=(
            (LN2, presets.ln2_neuron),
            (LN3, presets.ln3_neuron),
            (LN4, presets.ln4_neuron),
        ),
        synapses=tuple(synapses),
        sources=(AN1,),
    )
    return network if drift_factor == 1.0 else network.drifted(drift_factor)


def source_id(index: int) -> str:
    return f"S{index + 1}"


def detector_id(index: int) -> str:
    return f"D{index + 1}"


def build_polychronous(
    sources: int,
    detectors: int,
    delays: Sequence[Sequence[float]],
    *,
    base: DelayPreset,
    target_v_max: float,
    coincidence_fraction: float,
    dt: float = DEFAULT_DT,
) -> Network:
    """Realize each (source, detector) edge as a delay element with ``tau_delay = delays[j][i]``.

    Rows of ``delays`` belong to detectors and every edge shares the ``target_v_max`` peak.
    Each detector fires only when its summed membrane response reaches
    ``coincidence_fraction`` of the sum of its single-edge peaks.
    """
    if sources < 1 or detectors < 1:
        raise ValueError("sources and detectors must be >= 1.")
    if len(delays) != detectors or any(len(row) != sources for row in delays):
        raise ConfigurationError(
            "Delay matrix must have one row per detector and one column per source.",
            details={"sources": sources, "detectors": detectors},
        )
    inh_band = _band(base.sweep_w_inh)
    exc_band = _band(base.sweep_w_exc)
    targets = [(float(tau), target_v_max) for row in delays for tau in row]
    configs = configure_delays(
        targets,
        base.delay,
        base.neuron,
        duration=base.duration,
        dt=dt,
        w_inh_band=inh_band,
        w_exc_band=exc_band,
        timing_metric="tau_delay",
        tau_tolerance=EDGE_DELAY_TOLERANCE,
    )
    stim: SpikeTrain = delay_stim(base.delay.n_stim_spikes, base.delay.stim_window)
    single_peaks = [
        extract_metrics(trace).V_max
        for trace in delay_response_batch(configs, [base.neuron], [stim], base.duration, dt)
    ]

    rest = base.neuron.rest_potential
    neurons = []
    synapses = []
    for j in range(detectors):
        row = slice(j * sources, (j + 1) * sources)
        threshold = coincidence_fraction * sum(single_peaks[row])
        logger.info("Detector %s threshold %.3f mV above rest", detector_id(j), threshold)
        detector = replace(
            base.neuron,
            E_L=rest,
            I_dc=0.0,
            V_T=rest + threshold - 1.0,
            V_peak=rest + threshold,
        )
        neurons.append((detector_id(j), detector))
        for i, config in enumerate(configs[row]):
            pre, post = source_id(i), detector_id(j)
            synapses += [
                Connection(pre=pre, post=post, params=config.inh, label=f"{pre}->{post}:inh"),
                Connection(pre=pre, post=post, params=config.exc, label=f"{pre}->{post}:exc"),
            ]
    return Network(
        neurons=tuple(neurons),
        synapses=tuple(synapses),
        sources=tuple(source_id(i) for i in range(sources)),
    )


def _band(grid: Sequence[float]) -> tuple[float, float] | None:
    return (min(grid), max(grid)) if grid else None
