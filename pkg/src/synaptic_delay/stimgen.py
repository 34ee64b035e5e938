"""Seeded stimulus generators: single pulses, double pulses and the delay-element burst."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from synaptic_delay.models import PulseSpec, SpikeTrain

MIN_ISI = 0.01


def _seed_sequence(seed: int | tuple[int, ...]) -> list[int]:
    return list(seed) if isinstance(seed, tuple) else [seed]


def _pulse_times(spec: PulseSpec, rng: np.random.Generator, onset: float) -> list[float]:
    nominal = spec.nominal_isi
    n_isi = spec.n_spikes - 1
    if spec.noise_frac > 0:
        # One uniform per ISI, scaled by noise_frac: equal seeds share draws across levels.
        jitter = rng.uniform(-1.0, 1.0, size=n_isi)
        isis = np.maximum(nominal * (1.0 + spec.noise_frac * jitter), MIN_ISI)
    else:
        isis = np.full(n_isi, nominal)
    offsets = np.concatenate(([0.0], np.cumsum(isis)))
    return (onset + offsets).tolist()


def pulse(spec: PulseSpec) -> SpikeTrain:
    """One pulse of ``n_spikes`` spikes with per-ISI uniform phase noise placed cumulatively."""
    rng = np.random.default_rng(_seed_sequence(spec.seed))
    return SpikeTrain.from_iterable(_pulse_times(spec, rng, 0.0))


def double_pulse(spec: PulseSpec) -> SpikeTrain:
    """Two pulses; the second is anchored at ``pulse_dur + ipi``.

    First-pulse spikes at or after the anchor are dropped, so ``ipi = 0`` yields one
    continuous train with the shared boundary spike kept once.
    """
    rng = np.random.default_rng(_seed_sequence(spec.seed))
    anchor = spec.pulse_dur + spec.ipi
    first = [t for t in _pulse_times(spec, rng, 0.0) if t < anchor]
    second = _pulse_times(spec, rng, anchor)
    return SpikeTrain.from_iterable(first + second)


def delay_stim(n: int = 4, window: float = 20.0) -> SpikeTrain:
    if n < 1:
        raise ValueError("n must be >= 1.")
    if window < 0:
        raise ValueError("window must be >= 0.")
    if n == 1:
        return SpikeTrain(times=(0.0,))
    return SpikeTrain.from_iterable(np.linspace(0.0, window, n).tolist())


def write_spike_train_csv(path: Path, train: SpikeTrain) -> Path:
    """Write one spike time (ms) per line."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        for value in train.times:
            writer.writerow([repr(value)])
    return path


def read_spike_train_csv(path: Path) -> SpikeTrain:
    times: list[float] = []
    with path.open("r", encoding="utf-8", newline="") as handle:
        for row in csv.reader(handle):
            if not row or not row[0].strip():
                continue
            try:
                times.append(float(row[0]))
            except ValueError as exc:
                raise ValueError(f"{path}: not a spike time: {row[0]!r}") from exc
    return SpikeTrain.from_iterable(times)
