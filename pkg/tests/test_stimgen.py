from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from synaptic_delay.models import PulseSpec, SpikeTrain
from synaptic_delay.stimgen import (
    MIN_ISI,
    delay_stim,
    double_pulse,
    pulse,
    read_spike_train_csv,
    write_spike_train_csv,
)


@pytest.mark.unit
def test_noiseless_pulse_is_evenly_spaced() -> None:
    train = pulse(PulseSpec(pulse_dur=20.0, n_spikes=11))
    assert train.times == pytest.approx([2.0 * i for i in range(11)])


@pytest.mark.unit
def test_double_pulse_anchors_second_pulse_after_interval() -> None:
    train = double_pulse(PulseSpec(pulse_dur=20.0, n_spikes=11, ipi=20.0))
    assert len(train) == 22
    assert train.times[11] == pytest.approx(40.0)
    assert train.times[-1] == pytest.approx(60.0)


@pytest.mark.unit
def test_zero_interval_merges_the_shared_boundary_spike() -> None:
    train = double_pulse(PulseSpec(pulse_dur=20.0, n_spikes=11, ipi=0.0))
    assert len(train) == 21
    assert train.times == pytest.approx([2.0 * i for i in range(21)])


@pytest.mark.unit
def test_noisy_pulse_is_reproducible_per_seed() -> None:
    spec = PulseSpec(noise_frac=0.5, seed=(1, 3, 20000))
    assert pulse(spec) == pulse(spec)
    assert pulse(spec) != pulse(PulseSpec(noise_frac=0.5, seed=(1, 4, 20000)))


@pytest.mark.unit
def test_noisy_intervals_stay_within_jitter_bounds() -> None:
    spec = PulseSpec(pulse_dur=20.0, n_spikes=11, noise_frac=0.3, seed=7)
    isis = np.diff(pulse(spec).as_array())
    assert isis.min() >= MIN_ISI
    assert isis.max() <= 2.0 * 1.3 + 1e-9


@pytest.mark.unit
def test_noise_levels_scale_the_same_draws() -> None:
    low = np.diff(pulse(PulseSpec(noise_frac=0.1, seed=5)).as_array()) - 2.0
    high = np.diff(pulse(PulseSpec(noise_frac=0.2, seed=5)).as_array()) - 2.0
    assert high == pytest.approx(2.0 * low, abs=1e-9)


@pytest.mark.unit
def test_delay_stim_spreads_spikes_over_window() -> None:
    assert delay_stim(4, 20.0).times == pytest.approx([0.0, 20.0 / 3, 40.0 / 3, 20.0])
    assert delay_stim(1, 20.0).times == (0.0,)
    with pytest.raises(ValueError, match="n must be"):
        delay_stim(0)


@pytest.mark.unit
def test_pulse_spec_validates_ranges() -> None:
    with pytest.raises(ValueError, match="noise_frac"):
        PulseSpec(noise_frac=1.5)
    with pytest.raises(ValueError, match="n_spikes"):
        PulseSpec(n_spikes=1)
    assert PulseSpec(pulse_dur=20.0, n_spikes=11).nominal_isi == 2.0


@pytest.mark.unit
def test_spike_train_csv_round_trip(tmp_path: Path) -> None:
    train = SpikeTrain(times=(0.0, 6.666666666666667, 20.0))
    path = write_spike_train_csv(tmp_path / "stim.csv", train)
    assert read_spike_train_csv(path) == train


@pytest.mark.unit
def test_spike_train_csv_rejects_garbage(tmp_path: Path) -> None:
    path = tmp_path / "bad.csv"
    path.write_text("1.0\nabc\n", encoding="utf-8")
    with pytest.raises(ValueError, match="not a spike time"):
        read_spike_train_csv(path)
