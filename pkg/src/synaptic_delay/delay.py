"""Disynaptic delay element: summed currents, membrane response and weight configuration."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from synaptic_delay.dynamics import dpi_receive_spike, dpi_step, steps_for
from synaptic_delay.errors import UnreachableTargetError
from synaptic_delay.metrics import baseline_subtract, extract_metrics
from synaptic_delay.models import (
    DEFAULT_DT,
    DelayElementConfig,
    DelayMetrics,
    NeuronParams,
    SpikeTrain,
    SynapseState,
    Trace,
)
from synaptic_delay.netsim import Connection, Network, simulate_batch
from synaptic_delay.stimgen import delay_stim

logger = logging.getLogger(__name__)

RESPONSE_LEAD = 10.0
SOURCE_ID = "stim"
NEURON_ID = "delay"

# Default search band relative to the base weights, matching the shipped sweep grids.
INH_BAND_SCALE = (0.4, 20.0 / 3.0)
EXC_BAND_SCALE = (0.375, 2.25)
MAX_ALTERNATIONS = 3
TIMING_METRICS = ("tau_inh", "tau_delay")


def summed_psc(inh_state: SynapseState, exc_state: SynapseState, extra_exc: float = 0.0) -> float:
    """Net postsynaptic current with subtractive inhibition."""
    return extra_exc + exc_state.I_out - inh_state.I_out


def psc_trace(
    config: DelayElementConfig,
    stim: SpikeTrain,
    duration: float,
    dt: float = DEFAULT_DT,
) -> Trace:
    """Net current of the synapse pair, integrated with the scalar reference steps."""
    n_steps = steps_for(duration, dt)
    due = {steps_for(t, dt) for t in stim.times}
    inh = SynapseState()
    exc = SynapseState()
    values = np.empty(n_steps, dtype=np.float64)
    for k in range(n_steps):
        t = k * dt
        if k in due:
            inh = dpi_receive_spike(inh, config.inh, t)
            exc = dpi_receive_spike(exc, config.exc, t)
        inh = dpi_step(inh, config.inh, t, dt, synapse_id="inh")
        exc = dpi_step(exc, config.exc, t, dt, synapse_id="exc")
        values[k] = summed_psc(inh, exc)
    return Trace(start=dt, dt=dt, values=values)


def delay_network(config: DelayElementConfig, neuron: NeuronParams) -> Network:
    """Single neuron driven by the inhibitory/excitatory pair from one source."""
    return Network(
        neurons=((NEURON_ID, neuron),),
        synapses=(
            Connection(pre=SOURCE_ID, post=NEURON_ID, params=config.inh, label="inh"),
            Connection(pre=SOURCE_ID, post=NEURON_ID, params=config.exc, label="exc"),
        ),
        sources=(SOURCE_ID,),
    )


def delay_response(
    config: DelayElementConfig,
    neuron: NeuronParams,
    stim: SpikeTrain,
    duration: float,
    dt: float = DEFAULT_DT,
) -> Trace:
    """Baseline-relative membrane trace; time 0 is the stimulus origin.

    The simulation runs a short quiet lead before the stimulus so the pre-stimulus
    baseline can be measured and subtracted.
    """
    return delay_response_batch([config], [neuron], [stim], duration, dt)[0]


def delay_response_batch(
    configs: Sequence[DelayElementConfig],
    neurons: Sequence[NeuronParams],
    stims: Sequence[SpikeTrain],
    duration: float,
    dt: float = DEFAULT_DT,
) -> list[Trace]:
    """Evaluate many delay elements in one batched simulation.

    ``neurons`` and ``stims`` may hold a single entry, broadcast across ``configs``.
    """
    size = len(configs)
    if size == 0:
        return []
    neuron_list = list(neurons) * size if len(neurons) == 1 else list(neurons)
    stim_list = list(stims) * size if len(stims) == 1 else list(stims)
    if len(neuron_list) != size or len(stim_list) != size:
        raise ValueError("configs, neurons and stims must have matching lengths.")
    for stim in stim_list:
        if stim.times and stim.times[-1] >= duration:
            raise ValueError(
                f"Stimulus spike at {stim.times[-1]} ms lies outside [0, {duration}) ms."
            )

    networks = [delay_network(c, n) for c, n in zip(configs, neuron_list)]
    stimuli = [{SOURCE_ID: stim.shifted(RESPONSE_LEAD)} for stim in stim_list]
    results = simulate_batch(networks, stimuli, duration + RESPONSE_LEAD, dt, record=[NEURON_ID])

    traces: list[Trace] = []
    for result in results:
        raw = result.traces[NEURON_ID]
        shifted = Trace(start=raw.start - RESPONSE_LEAD, dt=dt, values=raw.values)
        traces.append(baseline_subtract(shifted, (-RESPONSE_LEAD, 0.0)))
    return traces


@dataclass(slots=True)
class _Bracket:
    """k-ary bisection state for one target on a metric increasing in the weight."""

    target: float
    tolerance: float
    lo: float
    hi: float
    v_lo: float
    v_hi: float
    best_w: float
    best_err: float
    done: bool = False

    def probes(self, count: int) -> list[float]:
        return np.linspace(self.lo, self.hi, count + 2)[1:-1].tolist()

    def update(self, weights: Sequence[float], values: Sequence[float]) -> None:
        points = [(self.lo, self.v_lo), *zip(weights, values), (self.hi, self.v_hi)]
        for w, v in points:
            err = abs(v - self.target)
            if err < self.best_err:
                self.best_w, self.best_err = w, err
        index = next((i for i, (_, v) in enumerate(points) if v >= self.target), len(points) - 1)
        index = min(max(index, 1), len(points) - 1)
        (self.lo, self.v_lo), (self.hi, self.v_hi) = points[index - 1], points[index]
        if self.best_err <= self.tolerance / 2 or self.hi - self.lo <= 1e-6 * max(1.0, self.hi):
            self.done = True


def _metric_value(metrics: DelayMetrics, name: str) -> float:
    value = metrics.value(name)
    return 0.0 if math.isnan(value) else value


Reach = tuple[float, float]


def _search_weights(
    indices: Sequence[int],
    build: Callable[[int, float], DelayElementConfig],
    measure: Callable[[list[DelayElementConfig]], list[DelayMetrics]],
    *,
    metric: str,
    targets: Sequence[float],
    band: tuple[float, float],
    tolerance: float,
    probes: int,
    max_iterations: int,
) -> tuple[dict[int, float], dict[int, Reach]]:
    """Bisect one weight per target; returns the best weights and the metric at the band ends.

    A target outside the values measured at the band ends settles on the nearer end; the
    caller decides whether that is final once the other weight has moved.
    """
    lo, hi = band
    ends = measure([build(i, w) for i in indices for w in (lo, hi)])
    brackets: dict[int, _Bracket] = {}
    reach: dict[int, Reach] = {}
    for position, i in enumerate(indices):
        v_lo = _metric_value(ends[2 * position], metric)
        v_hi = _metric_value(ends[2 * position + 1], metric)
        reach[i] = (v_lo, v_hi)
        target = targets[i]
        bracket = _Bracket(target, tolerance, lo, hi, v_lo, v_hi, best_w=lo, best_err=math.inf)
        bracket.update([], [])
        if not v_lo <= target <= v_hi:
            bracket.done = True
            logger.debug(
                "configure_delay %s target %.3f outside [%.3f, %.3f] at this pass",
                metric,
                target,
                v_lo,
                v_hi,
            )
        brackets[i] = bracket

    for iteration in range(max_iterations):
        active = [i for i in indices if not brackets[i].done]
        if not active:
            break
        grids = {i: brackets[i].probes(probes) for i in active}
        measured = measure([build(i, w) for i in active for w in grids[i]])
        for position, i in enumerate(active):
            chunk = measured[position * probes : (position + 1) * probes]
            brackets[i].update(grids[i], [_metric_value(m, metric) for m in chunk])
        logger.debug(
            "configure_delay %s round %d: %s",
            metric,
            iteration,
            {i: round(brackets[i].best_err, 3) for i in active},
        )
    return {i: brackets[i].best_w for i in indices}, reach


def configure_delays(
    targets: Sequence[tuple[float, float]],
    base: DelayElementConfig,
    neuron: NeuronParams,
    *,
    stim: SpikeTrain | None = None,
    duration: float = 300.0,
    dt: float = DEFAULT_DT,
    w_inh_band: tuple[float, float] | None = None,
    w_exc_band: tuple[float, float] | None = None,
    timing_metric: str = "tau_inh",
    tau_tolerance: float = 5.0,
    v_max_tolerance: float = 10.0,
    probes: int = 8,
    max_iterations: int = 40,
) -> list[DelayElementConfig]:
    """Configure one delay element per ``(timing, V_max)`` target, searching in lockstep.

    ``w_inh`` is searched against ``timing_metric`` (``tau_inh`` or ``tau_delay``) first,
    then ``w_exc`` against ``V_max``; the pair is re-measured and both searches repeated
    while a target is out of tolerance. Targets still unmet after the last pass raise
    ``UnreachableTargetError``.
    """
    if probes < 1:
        raise ValueError("probes must be >= 1.")
    if timing_metric not in TIMING_METRICS:
        raise ValueError(f"timing_metric must be one of {', '.join(TIMING_METRICS)}.")
    stim = stim or delay_stim(base.n_stim_spikes, base.stim_window)
    inh_band = w_inh_band or (base.w_inh * INH_BAND_SCALE[0], base.w_inh * INH_BAND_SCALE[1])
    exc_band = w_exc_band or (base.w_exc * EXC_BAND_SCALE[0], base.w_exc * EXC_BAND_SCALE[1])
    timing_targets = [timing for timing, _ in targets]
    v_targets = [v for _, v in targets]

    def measure(configs: list[DelayElementConfig]) -> list[DelayMetrics]:
        traces = delay_response_batch(configs, [neuron], [stim], duration, dt)
        return [extract_metrics(trace) for trace in traces]

    def timing_error(metrics: DelayMetrics, i: int) -> float:
        return abs(_metric_value(metrics, timing_metric) - timing_targets[i])

    def satisfied(metrics: DelayMetrics, i: int) -> bool:
        return (
            timing_error(metrics, i) <= tau_tolerance
            and abs(metrics.V_max - v_targets[i]) <= v_max_tolerance
        )

    base_metrics = measure([base])[0]
    results: list[DelayElementConfig | None] = [
        base if satisfied(base_metrics, i) else None for i in range(len(targets))
    ]
    pending = [i for i, found in enumerate(results) if found is None]
    w_inh = {i: base.w_inh for i in pending}
    w_exc = {i: base.w_exc for i in pending}
    last: dict[int, DelayMetrics] = {i: base_metrics for i in pending}
    timing_reach: dict[int, Reach] = {}
    v_reach: dict[int, Reach] = {}

    for attempt in range(MAX_ALTERNATIONS):
        if not pending:
            break
        found_inh, reach = _search_weights(
            pending,
            lambda i, w: base.with_weights(w_inh=w, w_exc=w_exc[i]),
            measure,
            metric=timing_metric,
            targets=timing_targets,
            band=inh_band,
            tolerance=tau_tolerance,
            probes=probes,
            max_iterations=max_iterations,
        )
        w_inh.update(found_inh)
        timing_reach.update(reach)
        found_exc, reach = _search_weights(
            pending,
            lambda i, w: base.with_weights(w_inh=w_inh[i], w_exc=w),
            measure,
            metric="V_max",
            targets=v_targets,
            band=exc_band,
            tolerance=v_max_tolerance,
            probes=probes,
            max_iterations=max_iterations,
        )
        w_exc.update(found_exc)
        v_reach.update(reach)
        candidates = [base.with_weights(w_inh=w_inh[i], w_exc=w_exc[i]) for i in pending]
        still_pending: list[int] = []
        for i, candidate, metrics in zip(pending, candidates, measure(candidates)):
            last[i] = metrics
            if satisfied(metrics, i):
                results[i] = candidate
            else:
                still_pending.append(i)
        logger.debug(
            "configure_delay pass %d left %d target(s) unresolved", attempt, len(still_pending)
        )
        pending = still_pending

    if pending:
        first = pending[0]
        metric = timing_metric if timing_error(last[first], first) > tau_tolerance else "V_max"
        raise UnreachableTargetError(
            f"Delay targets could not be met within tolerance (first miss: {metric}).",
            details={
                "metric": metric,
                "targets": [targets[i] for i in pending],
                "best_weights": [[w_inh[i], w_exc[i]] for i in pending],
                "reachable": {
                    timing_metric: timing_reach[first],
                    "V_max": v_reach[first],
                },
                "bands": {"w_inh": inh_band, "w_exc": exc_band},
            },
        )
    return [found for found in results if found is not None]


def configure_delay(
    target_tau_inh: float,
    target_v_max: float,
    base: DelayElementConfig,
    neuron: NeuronParams,
    *,
    stim: SpikeTrain | None = None,
    duration: float = 300.0,
    dt: float = DEFAULT_DT,
    w_inh_band: tuple[float, float] | None = None,
    w_exc_band: tuple[float, float] | None = None,
) -> DelayElementConfig:
    """Find ``(w_inh, w_exc)`` meeting the targets within 5 ms and 10 mV."""
    return configure_delays(
        [(target_tau_inh, target_v_max)],
        base,
        neuron,
        stim=stim,
        duration=duration,
        dt=dt,
        w_inh_band=w_inh_band,
        w_exc_band=w_exc_band,
    )[0]
