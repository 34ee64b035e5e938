"""Experiment drivers: characterization, IPI/noise sweeps, boundary, delay control, detection."""

from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, replace
from typing import Any

import numpy as np
import numpy.typing as npt

from synaptic_delay.circuits import (
    AN1,
    LN2,
    LN3,
    LN4,
    build_cricket_circuit,
    build_polychronous,
    detector_id,
    source_id,
)
from synaptic_delay.config_schema import ExperimentConfig
from synaptic_delay.delay import delay_response, delay_response_batch
from synaptic_delay.metrics import classify, count_spikes, extract_metrics
from synaptic_delay.mismatch import MismatchSpec, population_characterize, sample_population
from synaptic_delay.models import (
    ClassificationOutcome,
    ExperimentReport,
    PulseSpec,
    SpikeTrain,
    Verdict,
)
from synaptic_delay.netsim import Network, SimResult, simulate, simulate_batch
from synaptic_delay.presets import DelayPreset
from synaptic_delay.stimgen import delay_stim, double_pulse

logger = logging.getLogger(__name__)

ENGINE = "forward-euler-fixed-step"
PULSE_DURATION = 20.0
TRIAL_TAIL = 60.0
CIRCUIT_NEURONS = (LN2, LN3, LN4)
DETECT_TRACE_STRIDE = 10


def _noise_key(level: float) -> str:
    return f"{level:g}"


def _report(
    experiment: str,
    cfg: ExperimentConfig,
    tables: dict[str, list[dict[str, Any]]],
    summary: dict[str, Any],
) -> ExperimentReport:
    return ExperimentReport(
        experiment=experiment,
        config=cfg.to_dict(),
        config_hash=cfg.config_hash,
        provenance={
            "seed": cfg.seed,
            "dt": cfg.dt,
            "trials": cfg.trials,
            "drift_factor": cfg.drift_factor,
            "engine": ENGINE,
        },
        tables=tables,
        summary=summary,
    )


def _drifted_preset(preset: DelayPreset, factor: float) -> DelayPreset:
    if factor == 1.0:
        return preset
    return replace(preset, neuron=preset.neuron.drifted(factor), delay=preset.delay.drifted(factor))


def trial_duration(ipi: float) -> float:
    return 2 * PULSE_DURATION + ipi + TRIAL_TAIL


def trial_stimulus(seed: int, trial: int, ipi: float, noise: float) -> SpikeTrain:
    """Double pulse for one trial; the jitter stream depends on (seed, trial, ipi) only."""
    spec = PulseSpec(
        pulse_dur=PULSE_DURATION,
        ipi=ipi,
        noise_frac=noise,
        seed=(seed, trial, int(round(ipi * 1000))),
    )
    return double_pulse(spec)


@dataclass(frozen=True, slots=True)
class _TrialBlock:
    """Spike counts of one batched run: ``counts[point, trial, neuron]``."""

    counts: npt.NDArray[np.int64]
    ln2_per_pulse: npt.NDArray[np.int64]


def _run_cricket_trials(
    networks: Sequence[Network],
    cfg: ExperimentConfig,
    ipi: float,
    noise: float,
) -> _TrialBlock:
    trials = cfg.trials
    distinct = 1 if noise == 0 else trials
    trains = [trial_stimulus(cfg.seed, trial, ipi, noise) for trial in range(distinct)]
    batch_networks = [net for net in networks for _ in range(distinct)]
    stimuli = [{AN1: train} for _ in networks for train in trains]
    duration = trial_duration(ipi)
    logger.info(
        "Cricket batch ipi=%g noise=%g points=%d trials=%d",
        ipi,
        noise,
        len(networks),
        distinct,
    )
    results = simulate_batch(batch_networks, stimuli, duration, cfg.dt)

    second_onset = PULSE_DURATION + ipi
    counts = np.zeros((len(networks), distinct, len(CIRCUIT_NEURONS)), dtype=np.int64)
    per_pulse = np.zeros((len(networks), distinct, 2), dtype=np.int64)
    for index, result in enumerate(results):
        point, trial = divmod(index, distinct)
        for n, neuron_id in enumerate(CIRCUIT_NEURONS):
            counts[point, trial, n] = result.count(neuron_id)
        per_pulse[point, trial, 0] = count_spikes(result.spikes[LN2], (0.0, second_onset))
        per_pulse[point, trial, 1] = count_spikes(result.spikes[LN2], (second_onset, duration))
    if distinct != trials:
        counts = np.repeat(counts, trials, axis=1)
        per_pulse = np.repeat(per_pulse, trials, axis=1)
    return _TrialBlock(counts=counts, ln2_per_pulse=per_pulse)


def _verdicts(
    ln4: Mapping[float, npt.NDArray[np.int64]],
    ln3: Mapping[float, npt.NDArray[np.int64]],
    target_ipi: float,
) -> list[ClassificationOutcome]:
    """Classify each trial from its per-IPI LN4 counts (arrays indexed by trial)."""
    trials = len(next(iter(ln4.values())))
    return [
        classify(
            {ipi: int(ln4[ipi][t]) for ipi in ln4},
            target_ipi,
            {ipi: int(ln3[ipi][t]) for ipi in ln3},
        )
        for t in range(trials)
    ]


def run_characterization(cfg: ExperimentConfig) -> ExperimentReport:
    logger.info("characterize: %d instances", cfg.population_size)
    preset = _drifted_preset(cfg.presets.delay("delay-characterization"), cfg.drift_factor)
    spec = (preset.mismatch or MismatchSpec()).with_seed(cfg.seed)
    stim = delay_stim(preset.delay.n_stim_spikes, preset.delay.stim_window)

    nominal_trace = delay_response(preset.delay, preset.neuron, stim, preset.duration, cfg.dt)
    nominal = extract_metrics(nominal_trace)
    population = sample_population(preset.neuron, preset.delay, cfg.population_size, spec)
    result = population_characterize(population, stim, preset.duration, cfg.dt)

    summary = dict(result.summary)
    summary["nominal"] = nominal.to_row()
    summary["mismatch"] = spec.to_dict()
    logger.info("characterize: valid fraction %.3f", summary["valid_fraction"])
    return _report(
        "characterize",
        cfg,
        {"metrics": result.metric_rows(), "histograms": result.histogram_rows()},
        summary,
    )


def run_detect(
    cfg: ExperimentConfig,
    ipi: float,
    *,
    include_delay: bool = True,
    noise: float = 0.0,
) -> ExperimentReport:
    """One double-pulse trial with spike lists and membrane traces of LN2, LN3 and LN4."""
    network = build_cricket_circuit(
        cfg.presets.cricket(cfg.cricket_variant),
        include_delay=include_delay,
        drift_factor=cfg.drift_factor,
    )
    stim = trial_stimulus(cfg.seed, 0, ipi, noise)
    result = simulate(network, {AN1: stim}, trial_duration(ipi), cfg.dt, record=CIRCUIT_NEURONS)
    trace_rows = result.trace_rows()[DETECT_TRACE_STRIDE - 1 :: DETECT_TRACE_STRIDE]
    counts = {neuron_id: result.count(neuron_id) for neuron_id in CIRCUIT_NEURONS}
    summary = {
        "ipi": ipi,
        "noise": noise,
        "include_delay": include_delay,
        "variant": cfg.cricket_variant,
        "counts": counts,
        "stimulus_spikes": len(stim),
        "ln4_fired": counts[LN4] > 0,
    }
    return _report("detect", cfg, {"spikes": result.spike_rows(), "traces": trace_rows}, summary)


def run_ipi_sweep(cfg: ExperimentConfig) -> ExperimentReport:
    network = build_cricket_circuit(
        cfg.presets.cricket(cfg.cricket_variant),
        drift_factor=cfg.drift_factor,
    )
    stats_rows: list[dict[str, Any]] = []
    trial_rows: list[dict[str, Any]] = []
    rate_rows: list[dict[str, Any]] = []
    fp_by_noise: dict[str, float] = {}
    fn_by_noise: dict[str, float] = {}
    short_fp: list[float] = []
    short_ipi = cfg.target_ipi - 10.0
    ln2_pulse_counts: list[int] = []

    for noise in cfg.noise_levels:
        ln3: dict[float, npt.NDArray[np.int64]] = {}
        ln4: dict[float, npt.NDArray[np.int64]] = {}
        for ipi in cfg.ipi_set:
            block = _run_cricket_trials([network], cfg, ipi, noise)
            counts = block.counts[0]
            ln3[ipi] = counts[:, 1]
            ln4[ipi] = counts[:, 2]
            if ipi > 0:
                ln2_pulse_counts.extend(block.ln2_per_pulse[0].ravel().tolist())
            stats_rows.append(
                {
                    "noise": noise,
                    "ipi": ipi,
                    "ln2_mean": round(float(counts[:, 0].mean()), 6),
                    "ln2_std": round(float(counts[:, 0].std()), 6),
                    "ln2_per_pulse_mean": round(float(block.ln2_per_pulse[0].mean()), 6),
                    "ln3_mean": round(float(counts[:, 1].mean()), 6),
                    "ln3_std": round(float(counts[:, 1].std()), 6),
                    "ln4_mean": round(float(counts[:, 2].mean()), 6),
                    "ln4_std": round(float(counts[:, 2].std()), 6),
                    "ln4_fire_rate": round(float((counts[:, 2] > 0).mean()), 6),
                }
            )
            if ipi == short_ipi:
                short_fp.append(float((counts[:, 2] > 0).mean()))

        outcomes = _verdicts(ln4, ln3, cfg.target_ipi)
        for trial, outcome in enumerate(outcomes):
            trial_rows.append(
                {
                    "noise": noise,
                    "trial": trial,
                    "verdict": outcome.verdict.value,
                    "errors": ";".join(kind.value for kind in outcome.errors),
                    "false_positive_ipis": ";".join(
                        f"{ipi:g}" for ipi in outcome.false_positive_ipis
                    ),
                    "missed_target": outcome.missed_target,
                }
            )
        fp = sum(1 for o in outcomes if o.false_positive_ipis) / len(outcomes)
        fn = sum(1 for o in outcomes if o.missed_target) / len(outcomes)
        correct = sum(1 for o in outcomes if o.verdict is Verdict.CORRECT) / len(outcomes)
        fp_by_noise[_noise_key(noise)] = round(fp, 6)
        fn_by_noise[_noise_key(noise)] = round(fn, 6)
        rate_rows.append(
            {
                "noise": noise,
                "false_positive_rate": round(fp, 6),
                "false_negative_rate": round(fn, 6),
                "correct_rate": round(correct, 6),
            }
        )
        logger.info("ipi-sweep noise=%g fp=%.3f fn=%.3f", noise, fp, fn)

    summary = {
        "variant": cfg.cricket_variant,
        "false_positive_rate": fp_by_noise,
        "false_negative_rate": fn_by_noise,
        "short_ipi": short_ipi,
        "short_ipi_fire_rate": [round(v, 6) for v in short_fp],
        "short_ipi_fire_rate_non_decreasing": all(
            later >= earlier for earlier, later in zip(short_fp, short_fp[1:])
        ),
        "ln2_per_pulse_range": (
            [min(ln2_pulse_counts), max(ln2_pulse_counts)] if ln2_pulse_counts else None
        ),
    }
    return _report(
        "ipi-sweep",
        cfg,
        {"ipi_stats": stats_rows, "trials": trial_rows, "error_rates": rate_rows},
        summary,
    )


def _boundary_points(passing: set[tuple[float, float]], cfg: ExperimentConfig) -> list[list[float]]:
    """Passing grid points with at least one failing (or missing) grid neighbour."""
    ln3 = list(cfg.boundary_ln3_weights)
    ln4 = list(cfg.boundary_ln4_weights)
    edge: list[list[float]] = []
    for i, w3 in enumerate(ln3):
        for j, w4 in enumerate(ln4):
            if (w3, w4) not in passing:
                continue
            neighbours = [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)]
            if any(
                not (0 <= a < len(ln3) and 0 <= b < len(ln4)) or (ln3[a], ln4[b]) not in passing
                for a, b in neighbours
            ):
                edge.append([w3, w4])
    return edge


def run_boundary_sweep(cfg: ExperimentConfig) -> ExperimentReport:
    presets = cfg.presets.cricket(cfg.cricket_variant)
    points = [(w3, w4) for w3 in cfg.boundary_ln3_weights for w4 in cfg.boundary_ln4_weights]
    networks = [
        build_cricket_circuit(
            presets,
            ln3_input_weight=w3,
            ln4_excitation_weight=w4,
            drift_factor=cfg.drift_factor,
        )
        for w3, w4 in points
    ]
    logger.info("boundary: %d grid points x %d trials", len(points), cfg.trials)

    grid_rows: list[dict[str, Any]] = []
    passing_by_noise: dict[str, list[list[float]]] = {}
    boundary_by_noise: dict[str, list[list[float]]] = {}
    passing_sets: list[set[tuple[float, float]]] = []
    for noise in cfg.noise_levels:
        ln3: dict[float, npt.NDArray[np.int64]] = {}
        ln4: dict[float, npt.NDArray[np.int64]] = {}
        for ipi in cfg.ipi_set:
            block = _run_cricket_trials(networks, cfg, ipi, noise)
            ln3[ipi] = block.counts[:, :, 1]
            ln4[ipi] = block.counts[:, :, 2]

        passing: set[tuple[float, float]] = set()
        for p, (w3, w4) in enumerate(points):
            outcomes = _verdicts(
                {ipi: ln4[ipi][p] for ipi in cfg.ipi_set},
                {ipi: ln3[ipi][p] for ipi in cfg.ipi_set},
                cfg.target_ipi,
            )
            correct = sum(1 for o in outcomes if o.correct)
            passes = correct == len(outcomes)
            if passes:
                passing.add((w3, w4))
            grid_rows.append(
                {
                    "noise": noise,
                    "ln3_weight": w3,
                    "ln4_weight": w4,
                    "correct_fraction": round(correct / len(outcomes), 6),
                    "false_positive_trials": sum(1 for o in outcomes if o.false_positive_ipis),
                    "false_negative_trials": sum(1 for o in outcomes if o.missed_target),
                    "passes": passes,
                }
            )
            logger.debug("boundary noise=%g point=(%g, %g) correct=%d", noise, w3, w4, correct)
        passing_sets.append(passing)
        passing_by_noise[_noise_key(noise)] = [list(point) for point in points if point in passing]
        boundary_by_noise[_noise_key(noise)] = _boundary_points(passing, cfg)

    reference = passing_sets[0]
    summary = {
        "variant": cfg.cricket_variant,
        "reference_noise": cfg.noise_levels[0],
        "passing": passing_by_noise,
        "boundary": boundary_by_noise,
        "passing_counts": {k: len(v) for k, v in passing_by_noise.items()},
        "subset_of_reference": {
            _noise_key(noise): passing <= reference
            for noise, passing in zip(cfg.noise_levels, passing_sets)
        },
    }
    return _report("boundary", cfg, {"grid": grid_rows}, summary)


def _non_decreasing(values: Sequence[float]) -> bool:
    return all(later >= earlier for earlier, later in zip(values, values[1:]))


def run_delay_config_sweep(cfg: ExperimentConfig) -> ExperimentReport:
    preset = _drifted_preset(cfg.presets.delay("delay-config"), cfg.drift_factor)
    w_inh_grid = cfg.delay_sweep_w_inh or preset.sweep_w_inh
    w_exc_grid = cfg.delay_sweep_w_exc or preset.sweep_w_exc
    if not w_inh_grid or not w_exc_grid:
        raise ValueError("delay sweep grids must be nonempty.")
    grid = [(w_inh, w_exc) for w_inh in w_inh_grid for w_exc in w_exc_grid]
    configs = [preset.delay.with_weights(w_inh=w_inh, w_exc=w_exc) for w_inh, w_exc in grid]
    stim = delay_stim(preset.delay.n_stim_spikes, preset.delay.stim_window)
    logger.info("delay-sweep: %d grid points", len(grid))
    metrics = [
        extract_metrics(trace)
        for trace in delay_response_batch(configs, [preset.neuron], [stim], preset.duration, cfg.dt)
    ]

    rows = []
    for (w_inh, w_exc), m in zip(grid, metrics):
        row = m.to_row()
        row.update({"w_inh": w_inh, "w_exc": w_exc})
        rows.append(row)
    lookup = {point: m for point, m in zip(grid, metrics)}
    tau_monotone = all(
        _non_decreasing([lookup[(w_inh, w_exc)].tau_inh for w_inh in w_inh_grid])
        for w_exc in w_exc_grid
    )
    v_monotone = all(
        _non_decreasing([lookup[(w_inh, w_exc)].V_max for w_exc in w_exc_grid])
        for w_inh in w_inh_grid
    )
    tau_values = [m.tau_inh for m in metrics if m.valid_inh]
    v_values = [m.V_max for m in metrics]
    summary = {
        "tau_inh_range": (
            [round(min(tau_values), 6), round(max(tau_values), 6)] if tau_values else None
        ),
        "V_max_range": [round(min(v_values), 6), round(max(v_values), 6)],
        "tau_inh_non_decreasing_in_w_inh": tau_monotone,
        "V_max_non_decreasing_in_w_exc": v_monotone,
    }
    return _report("delay-sweep", cfg, {"grid": rows}, summary)


def run_stim_count_sweep(cfg: ExperimentConfig) -> ExperimentReport:
    """Delay-config response as a function of the number of stimulus spikes in the window."""
    preset = _drifted_preset(cfg.presets.delay("delay-config"), cfg.drift_factor)
    stims = [delay_stim(n, preset.delay.stim_window) for n in cfg.stim_counts]
    traces = delay_response_batch(
        [preset.delay] * len(stims),
        [preset.neuron],
        stims,
        preset.duration,
        cfg.dt,
    )
    rows = []
    for n, trace in zip(cfg.stim_counts, traces):
        row = extract_metrics(trace).to_row()
        row["n_spikes"] = n
        rows.append(row)
    summary = {
        "V_max": [row["V_max"] for row in rows],
        "tau_inh": [row["tau_inh"] for row in rows],
    }
    return _report("stim-sweep", cfg, {"curve": rows}, summary)


def polychronous_patterns(
    onsets: Sequence[float],
    burst: SpikeTrain,
) -> dict[str, dict[str, SpikeTrain]]:
    """Matched, time-reversed and silent inputs for a detector bank."""
    count = len(onsets)
    return {
        "matched": {source_id(i): burst.shifted(onsets[i]) for i in range(count)},
        "swapped": {source_id(i): burst.shifted(onsets[count - 1 - i]) for i in range(count)},
        "silent": {},
    }


def run_polychronous_demo(cfg: ExperimentConfig) -> ExperimentReport:
    poly = cfg.presets.polychronous()
    base = _drifted_preset(cfg.presets.delay(poly.base), cfg.drift_factor)
    n_sources = len(poly.pattern_onsets)
    n_detectors = len(poly.delays)
    network = build_polychronous(
        n_sources,
        n_detectors,
        poly.delays,
        base=base,
        target_v_max=poly.target_v_max,
        coincidence_fraction=poly.coincidence_fraction,
        dt=cfg.dt,
    )
    burst = delay_stim(base.delay.n_stim_spikes, base.delay.stim_window)
    patterns = polychronous_patterns(poly.pattern_onsets, burst)
    results: list[SimResult] = simulate_batch(
        [network],
        list(patterns.values()),
        poly.duration,
        cfg.dt,
    )

    detectors = [detector_id(j) for j in range(n_detectors)]
    detection_rows = []
    counts: dict[str, dict[str, int]] = {}
    for name, result in zip(patterns, results):
        counts[name] = {d: result.count(d) for d in detectors}
        detection_rows.append({"pattern": name, **counts[name]})

    edge_rows = []
    for j, detector in enumerate(detectors):
        for i in range(n_sources):
            pre = source_id(i)
            inh = network.connection(f"{pre}->{detector}:inh").params
            exc = network.connection(f"{pre}->{detector}:exc").params
            edge_rows.append(
                {
                    "source": pre,
                    "detector": detector,
                    "target_tau_delay": poly.delays[j][i],
                    "w_inh": round(inh.weight, 6),
                    "w_exc": round(exc.weight, 6),
                }
            )
    thresholds = {d: round(network.neuron(d).V_peak - network.neuron(d).E_L, 6) for d in detectors}
    selective = (
        n_detectors == 2
        and counts["matched"][detectors[0]] > 0
        and counts["matched"][detectors[1]] == 0
        and counts["swapped"][detectors[1]] > 0
        and counts["swapped"][detectors[0]] == 0
        and not any(counts["silent"].values())
    )
    summary = {"counts": counts, "thresholds": thresholds, "selective": selective}
    return _report("polychronous", cfg, {"detections": detection_rows, "edges": edge_rows}, summary)

