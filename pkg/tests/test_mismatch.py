from __future__ import annotations

import numpy as np
import pytest

from synaptic_delay.mismatch import (
    Distribution,
    MismatchSpec,
    histogram,
    population_characterize,
    sample_population,
)
from synaptic_delay.presets import load_presets
from synaptic_delay.stimgen import delay_stim

CANONICAL = load_presets().delay("delay-characterization")
SPEC = MismatchSpec(cv_map={"C": 0.05, "tau": 0.05, "inh.weight": 0.1}, seed=3)


@pytest.mark.unit
def test_same_seed_gives_identical_population() -> None:
    first = sample_population(CANONICAL.neuron, CANONICAL.delay, 8, SPEC)
    second = sample_population(CANONICAL.neuron, CANONICAL.delay, 8, SPEC)
    assert first == second
    other = sample_population(CANONICAL.neuron, CANONICAL.delay, 8, SPEC.with_seed(4))
    assert first != other


@pytest.mark.unit
def test_instance_draws_do_not_depend_on_population_size() -> None:
    small = sample_population(CANONICAL.neuron, CANONICAL.delay, 3, SPEC)
    large = sample_population(CANONICAL.neuron, CANONICAL.delay, 10, SPEC)
    assert small == large[:3]


@pytest.mark.unit
def test_qualified_keys_only_touch_their_synapse() -> None:
    spec = MismatchSpec(cv_map={"inh.weight": 0.2}, seed=1)
    population = sample_population(CANONICAL.neuron, CANONICAL.delay, 5, spec)
    assert all(delay.exc == CANONICAL.delay.exc for _, delay in population)
    assert all(neuron == CANONICAL.neuron for neuron, _ in population)
    assert len({delay.w_inh for _, delay in population}) == 5


@pytest.mark.unit
def test_zero_cv_reproduces_nominal_values() -> None:
    population = sample_population(CANONICAL.neuron, CANONICAL.delay, 4, MismatchSpec())
    assert all(item == (CANONICAL.neuron, CANONICAL.delay) for item in population)


@pytest.mark.unit
def test_lognormal_multipliers_have_unit_mean() -> None:
    spec = MismatchSpec(cv_map={"C": 0.1}, seed=11)
    population = sample_population(CANONICAL.neuron, CANONICAL.delay, 2000, spec)
    ratios = np.array([neuron.C / CANONICAL.neuron.C for neuron, _ in population])
    assert ratios.min() > 0
    assert ratios.mean() == pytest.approx(1.0, abs=0.01)
    assert ratios.std() == pytest.approx(0.1, abs=0.01)


@pytest.mark.unit
def test_truncated_normal_multipliers_stay_positive() -> None:
    spec = MismatchSpec(cv_map={"g_L": 0.8}, distribution=Distribution.TRUNCATED_NORMAL, seed=2)
    population = sample_population(CANONICAL.neuron, CANONICAL.delay, 200, spec)
    assert all(neuron.g_L > 0 for neuron, _ in population)


@pytest.mark.unit
def test_mismatch_spec_validation() -> None:
    with pytest.raises(ValueError, match="unknown parameters: V_T"):
        MismatchSpec(cv_map={"V_T": 0.1})
    with pytest.raises(ValueError, match="finite and >= 0"):
        MismatchSpec(cv_map={"C": -0.1})
    spec = MismatchSpec.from_mapping(
        {"cv_map": {"tau": 0.1, "inh.tau": 0.3}, "distribution": "truncated-normal"}
    )
    assert spec.cv_for("tau", "inh") == 0.3
    assert spec.cv_for("tau", "exc") == 0.1
    assert spec.distribution is Distribution.TRUNCATED_NORMAL


@pytest.mark.unit
def test_histogram_edges_are_multiples_of_width() -> None:
    hist = histogram("V_max", [0.5, 1.5, 19.9, 20.0], 10.0)
    assert hist.edges == (0.0, 10.0, 20.0, 30.0)
    assert hist.counts == (2, 1, 1)
    assert hist.mode_bin == (0.0, 10.0)

    negative = histogram("V_min", [-152.5, -130.0], 20.0)
    assert negative.edges == (-160.0, -140.0, -120.0)
    assert negative.counts == (1, 1)
    assert histogram("tau_inh", [], 2.0).mode_bin is None


@pytest.mark.integration
def test_identical_instances_collapse_to_single_bins() -> None:
    population = [(CANONICAL.neuron, CANONICAL.delay)] * 4
    stim = delay_stim(4, 20.0)
    result = population_characterize(population, stim, CANONICAL.duration, chunk_size=3)
    assert len(result.metrics) == 4
    assert len(set(m.V_max for m in result.metrics)) == 1
    for hist in result.histograms.values():
        assert hist.counts == (4,)
    assert result.summary["valid_fraction"] == 1.0
    assert result.summary["no_excursion_ids"] == []
    assert len(result.metric_rows()) == 4
    assert len(result.histogram_rows()) == 5


@pytest.mark.integration
def test_instances_without_excursion_are_flagged() -> None:
    silent = CANONICAL.delay.with_weights(w_inh=0.0, w_exc=0.0)
    population = [(CANONICAL.neuron, CANONICAL.delay), (CANONICAL.neuron, silent)]
    result = population_characterize(population, delay_stim(4, 20.0), CANONICAL.duration)
    assert result.summary["no_excursion_ids"] == [1]
    assert result.summary["valid_fraction"] == 0.5
    assert result.metric_rows()[1]["tau_inh"] is None
