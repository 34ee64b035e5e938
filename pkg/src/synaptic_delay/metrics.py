"""Delay-element waveform metrics, spike counting and detector classification."""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping
from dataclasses import replace

import numpy as np
import numpy.typing as npt

from synaptic_delay.errors import EmptyWindowError
from synaptic_delay.models import ClassificationOutcome, DelayMetrics, FloatArray, Trace

SIGNIFICANCE_FLOOR_MV = 1.0
METRIC_NAMES = ("V_min", "V_max", "tau_inh", "tau_exc", "tau_delay")


def baseline_subtract(trace: Trace, pre_window: tuple[float, float]) -> Trace:
    """Subtract the mean of the samples falling in ``[lo, hi)``."""
    lo, hi = pre_window
    if not lo < hi:
        raise ValueError("pre_window must satisfy lo < hi.")
    mask = trace.window_mask(lo, hi)
    if not mask.any():
        raise EmptyWindowError(
            "Baseline window contains no samples.",
            details={"window": [lo, hi], "trace_start": trace.start, "samples": len(trace)},
        )
    baseline = float(trace.values[mask].mean())
    return replace(trace, values=trace.values - baseline)


def _half_level_span(
    inside: npt.NDArray[np.bool_],
    values: FloatArray,
    peak: int,
    level: float,
) -> tuple[float, float]:
    """Fractional-index bounds of the contiguous ``inside`` run around ``peak``.

    Bounds are linearly interpolated between the last inside sample and its outside
    neighbour; a run touching either end of the trace is cut at that end.
    """
    n = values.size
    outside_left = np.flatnonzero(~inside[:peak])
    left = int(outside_left[-1]) + 1 if outside_left.size else 0
    outside_right = np.flatnonzero(~inside[peak + 1 :])
    right = peak + int(outside_right[0]) if outside_right.size else n - 1

    if left > 0:
        lo = (left - 1) + (level - values[left - 1]) / (values[left] - values[left - 1])
    else:
        lo = 0.0
    if right < n - 1:
        hi = right + (level - values[right]) / (values[right + 1] - values[right])
    else:
        hi = float(n - 1)
    return float(lo), float(hi)


def extract_metrics(trace: Trace, dt: float | None = None) -> DelayMetrics:
    """Measure a baseline-relative biphasic trace.

    ``V_min`` is the global minimum (first occurrence) and ``V_max`` the maximum from
    there on. Inhibition and excitation widths are full widths at half minimum and half
    maximum around those extrema; ``tau_delay`` runs from inhibition onset to excitation
    onset and ``tau_delay_alt`` from inhibition onset to excitation offset. Excursions
    smaller than 1 mV are flagged invalid and their widths reported as NaN.
    """
    if dt is not None and not math.isclose(dt, trace.dt, rel_tol=1e-9):
        raise ValueError(f"dt {dt} does not match the trace sampling step {trace.dt}.")
    values = np.asarray(trace.values, dtype=np.float64)
    if values.size == 0:
        raise EmptyWindowError("Cannot measure an empty trace.")
    step = trace.dt

    i_min = int(np.argmin(values))
    V_min = float(values[i_min])
    i_max = i_min + int(np.argmax(values[i_min:]))
    V_max = float(values[i_max])

    valid_inh = V_min <= -SIGNIFICANCE_FLOOR_MV
    valid_exc = V_max >= SIGNIFICANCE_FLOOR_MV

    inh_level = V_min / 2.0
    inh_lo, inh_hi = _half_level_span(values <= inh_level, values, i_min, inh_level)
    exc_level = V_max / 2.0
    exc_lo, exc_hi = _half_level_span(values >= exc_level, values, i_max, exc_level)

    nan = math.nan
    both = valid_inh and valid_exc
    return DelayMetrics(
        V_min=V_min,
        V_max=V_max,
        tau_inh=(inh_hi - inh_lo) * step if valid_inh else nan,
        tau_exc=(exc_hi - exc_lo) * step if valid_exc else nan,
        tau_delay=(exc_lo - inh_lo) * step if both else nan,
        tau_delay_alt=(exc_hi - inh_lo) * step if both else nan,
        t_min=trace.start + i_min * step,
        t_max=trace.start + i_max * step,
        inh_onset=trace.start + inh_lo * step if valid_inh else nan,
        exc_onset=trace.start + exc_lo * step if valid_exc else nan,
        valid_inh=valid_inh,
        valid_exc=valid_exc,
    )


def count_spikes(spikes: Iterable[float], window: tuple[float, float]) -> int:
    lo, hi = window
    if lo > hi:
        raise ValueError("window must satisfy lo <= hi.")
    return sum(1 for t in spikes if lo <= t < hi)


def classify(
    per_ipi_counts: Mapping[float, int],
    target_ipi: float,
    ln3_counts: Mapping[float, int] | None = None,
) -> ClassificationOutcome:
    """Correct iff LN4 fires at the target IPI and stays silent at every other one."""
    if target_ipi not in per_ipi_counts:
        raise ValueError(f"Counts do not cover the target IPI {target_ipi}.")
    false_positives = tuple(
        ipi for ipi in sorted(per_ipi_counts) if ipi != target_ipi and per_ipi_counts[ipi] > 0
    )
    return ClassificationOutcome(
        target_ipi=target_ipi,
        ln4_counts=dict(per_ipi_counts),
        ln3_counts=dict(ln3_counts or {}),
        false_positive_ipis=false_positives,
        missed_target=per_ipi_counts[target_ipi] == 0,
    )
