"""Fixed-step integration of the AdEx neuron and the DPI synapse."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, replace

import numpy as np
import numpy.typing as npt

from synaptic_delay.errors import NumericalDivergenceError
from synaptic_delay.models import (
    FloatArray,
    NeuronParams,
    NeuronState,
    SynapseParams,
    SynapseState,
)

IntArray = npt.NDArray[np.int64]
BoolArray = npt.NDArray[np.bool_]


def steps_for(duration: float, dt: float) -> int:
    """Number of whole steps covering ``duration`` (nearest integer)."""
    return int(math.floor(duration / dt + 0.5))


def adex_step(
    state: NeuronState,
    params: NeuronParams,
    I_syn: float,
    t: float,
    dt: float,
    *,
    neuron_id: str = "neuron",
) -> tuple[NeuronState, bool]:
    """Advance one explicit Euler step of the AdEx equations starting at time ``t``."""
    if dt <= 0:
        raise ValueError("dt must be > 0.")
    if not (math.isfinite(state.V) and math.isfinite(state.w) and math.isfinite(I_syn)):
        raise NumericalDivergenceError.at("Non-finite state or input", t=t, neuron=neuron_id)

    V = state.V
    w = state.w
    if params.adapt_enabled:
        w_next = w + dt * (params.a * (V - params.E_L) - w) / params.tau_w
    else:
        w_next = w

    if t < state.refr_until:
        held = min(max(params.V_r, params.V_floor), params.V_peak)
        return replace(state, V=held, w=w_next), False

    rate = -params.g_L * (V - params.E_L)
    if params.exp_enabled:
        try:
            rate += params.g_L * params.Delta_T * math.exp((V - params.V_T) / params.Delta_T)
        except OverflowError as exc:
            raise NumericalDivergenceError.at(
                "Exponential term overflowed", t=t, neuron=neuron_id
            ) from exc
    if params.adapt_enabled:
        rate -= w
    V_next = V + dt * (rate + I_syn + params.I_dc) / params.C

    if not (math.isfinite(V_next) and math.isfinite(w_next)):
        raise NumericalDivergenceError.at("Membrane update diverged", t=t, neuron=neuron_id)

    if V_next >= params.V_peak:
        return (
            NeuronState(
                V=params.V_r,
                w=w_next + params.b,
                refr_until=t + params.t_refr,
                last_spike=t + dt,
            ),
            True,
        )

    V_next = min(max(V_next, params.V_floor), params.V_peak)
    return replace(state, V=V_next, w=w_next), False


def dpi_step(
    state: SynapseState,
    params: SynapseParams,
    t: float,
    dt: float,
    *,
    synapse_id: str = "synapse",
) -> SynapseState:
    """One Euler step of ``tau * dI/dt + I = gain * I_in``; input is on while t < drive_until."""
    if dt <= 0:
        raise ValueError("dt must be > 0.")
    drive = params.amplitude if t < state.drive_until else 0.0
    current = state.I_out + dt / params.tau * (drive - state.I_out)
    if not math.isfinite(current):
        raise NumericalDivergenceError.at("Synaptic current diverged", t=t, synapse=synapse_id)
    return replace(state, I_out=max(current, 0.0))


def dpi_receive_spike(state: SynapseState, params: SynapseParams, t: float) -> SynapseState:
    """Extend the input pulse window; overlapping spikes never stack amplitude."""
    return replace(state, drive_until=max(state.drive_until, t + params.pulse_width))


def dpi_analytic_response(
    params: SynapseParams,
    pulse_start: float,
    pulse_end: float,
    t: float,
) -> float:
    """Closed-form DPI output for a single rectangular input pulse."""
    if not pulse_start < pulse_end:
        raise ValueError("pulse_start must be < pulse_end.")
    if t <= pulse_start:
        return 0.0
    amplitude = params.amplitude
    if t <= pulse_end:
        return amplitude * (1.0 - math.exp(-(t - pulse_start) / params.tau))
    peak = amplitude * (1.0 - math.exp(-(pulse_end - pulse_start) / params.tau))
    return peak * math.exp(-(t - pulse_end) / params.tau)


@dataclass(frozen=True, slots=True, eq=False)
class NeuronBank:
    """Neuron parameters laid out as ``(batch, neuron)`` arrays for the batched engine."""

    C: FloatArray
    g_L: FloatArray
    E_L: FloatArray
    V_T: FloatArray
    Delta_T: FloatArray
    tau_w: FloatArray
    a: FloatArray
    b: FloatArray
    V_r: FloatArray
    V_peak: FloatArray
    V_floor: FloatArray
    I_dc: FloatArray
    n_refr: IntArray
    exp_enabled: BoolArray
    adapt_enabled: BoolArray
    any_exp: bool
    any_adapt: bool

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[NeuronParams]], dt: float) -> NeuronBank:
        def column(name: str) -> FloatArray:
            return np.array([[getattr(p, name) for p in row] for row in rows], dtype=np.float64)

        exp_enabled = np.array([[p.exp_enabled for p in row] for row in rows], dtype=np.bool_)
        adapt_enabled = np.array([[p.adapt_enabled for p in row] for row in rows], dtype=np.bool_)
        n_refr = np.array(
            [[steps_for(p.t_refr, dt) for p in row] for row in rows],
            dtype=np.int64,
        )
        return cls(
            C=column("C"),
            g_L=column("g_L"),
            E_L=column("E_L"),
            V_T=column("V_T"),
            Delta_T=np.where(exp_enabled, column("Delta_T"), 1.0),
            tau_w=np.where(adapt_enabled, column("tau_w"), 1.0),
            a=column("a"),
            b=np.where(adapt_enabled, column("b"), 0.0),
            V_r=column("V_r"),
            V_peak=column("V_peak"),
            V_floor=column("V_floor"),
            I_dc=column("I_dc"),
            n_refr=n_refr,
            exp_enabled=exp_enabled,
            adapt_enabled=adapt_enabled,
            any_exp=bool(exp_enabled.any()),
            any_adapt=bool(adapt_enabled.any()),
        )

    def rest_state(self) -> tuple[FloatArray, FloatArray]:
        conductance = self.g_L + np.where(self.adapt_enabled, self.a, 0.0)
        V = self.E_L + self.I_dc / conductance
        w = np.where(self.adapt_enabled, self.a * (V - self.E_L), 0.0)
        return V, w


@dataclass(slots=True, eq=False)
class NeuronBankState:
    """Mutable integration state of a :class:`NeuronBank`; refractory ends are step indices."""

    V: FloatArray
    w: FloatArray
    refr_until: IntArray

    @classmethod
    def at_rest(cls, bank: NeuronBank) -> NeuronBankState:
        V, w = bank.rest_state()
        return cls(V=V, w=w, refr_until=np.full(V.shape, -1, dtype=np.int64))


def adex_step_bank(
    state: NeuronBankState,
    bank: NeuronBank,
    I_syn: FloatArray,
    k: int,
    dt: float,
) -> BoolArray:
    """Step every neuron of the bank in place at step ``k``; returns the spike mask."""
    V = state.V
    rate = -bank.g_L * (V - bank.E_L)
    if bank.any_exp:
        with np.errstate(over="ignore"):
            spike_current = bank.g_L * bank.Delta_T * np.exp((V - bank.V_T) / bank.Delta_T)
        rate = rate + np.where(bank.exp_enabled, spike_current, 0.0)
    if bank.any_adapt:
        rate = rate - np.where(bank.adapt_enabled, state.w, 0.0)
        w_next = np.where(
            bank.adapt_enabled,
            state.w + dt * (bank.a * (V - bank.E_L) - state.w) / bank.tau_w,
            state.w,
        )
    else:
        w_next = state.w
    V_next = V + dt * (rate + I_syn + bank.I_dc) / bank.C

    refractory = k < state.refr_until
    if refractory.any():
        V_next = np.where(refractory, bank.V_r, V_next)
        spiked = ~refractory & (V_next >= bank.V_peak)
    else:
        spiked = V_next >= bank.V_peak
    if spiked.any():
        V_next = np.where(spiked, bank.V_r, V_next)
        w_next = np.where(spiked, w_next + bank.b, w_next)
        state.refr_until = np.where(spiked, k + bank.n_refr, state.refr_until)

    state.V = np.clip(V_next, bank.V_floor, bank.V_peak)
    state.w = w_next
    return spiked


@dataclass(frozen=True, slots=True, eq=False)
class SynapseBank:
    """Synapse parameters as ``(batch, synapse)`` arrays; pulse widths in steps."""

    dt_over_tau: FloatArray
    amplitude: FloatArray
    pulse_steps: IntArray
    sign: FloatArray

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[SynapseParams]], dt: float) -> SynapseBank:
        return cls(
            dt_over_tau=np.array([[dt / p.tau for p in row] for row in rows], dtype=np.float64),
            amplitude=np.array([[p.amplitude for p in row] for row in rows], dtype=np.float64),
            pulse_steps=np.array(
                [[steps_for(p.pulse_width, dt) for p in row] for row in rows],
                dtype=np.int64,
            ),
            sign=np.array([[p.polarity.sign for p in row] for row in rows], dtype=np.float64),
        )


@dataclass(slots=True, eq=False)
class SynapseBankState:
    I_out: FloatArray
    drive_until: IntArray

    @classmethod
    def idle(cls, bank: SynapseBank) -> SynapseBankState:
        shape = bank.amplitude.shape
        return cls(
            I_out=np.zeros(shape, dtype=np.float64),
            drive_until=np.full(shape, -1, dtype=np.int64),
        )


def dpi_receive_bank(state: SynapseBankState, bank: SynapseBank, hits: BoolArray, k: int) -> None:
    """Open (or extend) the drive window of every synapse flagged in ``hits``."""
    state.drive_until = np.where(
        hits,
        np.maximum(state.drive_until, k + bank.pulse_steps),
        state.drive_until,
    )


def dpi_step_bank(state: SynapseBankState, bank: SynapseBank, k: int) -> None:
    drive = np.where(k < state.drive_until, bank.amplitude, 0.0)
    I_out = state.I_out + bank.dt_over_tau * (drive - state.I_out)
    state.I_out = np.maximum(I_out, 0.0)
