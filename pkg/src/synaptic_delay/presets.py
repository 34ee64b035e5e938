"""Named parameter presets shipped with the package and user overrides."""

from __future__ import annotations

import copy
import json
import logging
from collections.abc import Mapping
from dataclasses import dataclass
from importlib import resources
from typing import Any

from synaptic_delay.errors import MissingPresetError
from synaptic_delay.mismatch import MismatchSpec
from synaptic_delay.models import DelayElementConfig, NeuronParams, Polarity, SynapseParams

logger = logging.getLogger(__name__)

PRESETS_SCHEMA_VERSION = "v1"
PRESETS_RESOURCE = "presets.v1.json"
CRICKET_VARIANTS = {"central": None, "boundary": "cricket-boundary"}


def deep_merge(base: Mapping[str, Any], overrides: Mapping[str, Any]) -> dict[str, Any]:
    merged = copy.deepcopy(dict(base))
    for key, value in overrides.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


@dataclass(frozen=True, slots=True)
class DelayPreset:
    name: str
    provenance: str
    neuron: NeuronParams
    delay: DelayElementConfig
    duration: float
    mismatch: MismatchSpec | None = None
    sweep_w_inh: tuple[float, ...] = ()
    sweep_w_exc: tuple[float, ...] = ()


@dataclass(frozen=True, slots=True)
class CricketPresets:
    """Neuron and synapse parameters for the LN2/LN3/LN4 circuit."""

    variant: str
    ln2_neuron: NeuronParams
    ln2_input: SynapseParams
    ln3_neuron: NeuronParams
    ln3_input: SynapseParams
    ln3_delay: DelayElementConfig
    ln4_neuron: NeuronParams
    ln4_excitation: SynapseParams
    ln4_inhibition: SynapseParams


@dataclass(frozen=True, slots=True)
class PolychronousPreset:
    base: str
    delays: tuple[tuple[float, ...], ...]
    target_v_max: float
    pattern_onsets: tuple[float, ...]
    coincidence_fraction: float
    duration: float
    provenance: str = ""

    def __post_init__(self) -> None:
        if not self.delays or any(len(row) != len(self.pattern_onsets) for row in self.delays):
            raise ValueError("polychronous.delays rows must match pattern_onsets in length.")
        if not 0 < self.coincidence_fraction <= 1:
            raise ValueError("polychronous.coincidence_fraction must be in (0, 1].")


def _require(block: Mapping[str, Any], key: str, preset: str) -> Any:
    if key not in block:
        raise MissingPresetError(
            f"Preset {preset!r} is missing {key!r}.",
            details={"preset": preset, "key": key},
        )
    return block[key]


def _synapse(raw: Mapping[str, Any], polarity: Polarity) -> SynapseParams:
    payload = dict(raw)
    payload.setdefault("polarity", polarity.value)
    return SynapseParams.from_mapping(payload)


@dataclass(frozen=True, slots=True)
class PresetBook:
    presets: dict[str, dict[str, Any]]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(sorted(self.presets))

    def block(self, name: str) -> dict[str, Any]:
        try:
            return self.presets[name]
        except KeyError:
            raise MissingPresetError(
                f"Unknown preset {name!r}.",
                details={"preset": name, "available": list(self.names)},
            ) from None

    def delay(self, name: str) -> DelayPreset:
        block = self.block(name)
        mismatch = block.get("mismatch")
        sweep = block.get("sweep", {})
        return DelayPreset(
            name=name,
            provenance=str(block.get("provenance", "")),
            neuron=NeuronParams.from_mapping(_require(block, "neuron", name)),
            delay=DelayElementConfig.from_mapping(_require(block, "delay", name)),
            duration=float(_require(block, "duration", name)),
            mismatch=None if mismatch is None else MismatchSpec.from_mapping(mismatch),
            sweep_w_inh=tuple(float(w) for w in sweep.get("w_inh", ())),
            sweep_w_exc=tuple(float(w) for w in sweep.get("w_exc", ())),
        )

    def cricket(self, variant: str = "central") -> CricketPresets:
        if variant not in CRICKET_VARIANTS:
            raise ValueError(f"Unsupported cricket variant: {variant}")
        blocks = {name: self.block(name) for name in ("LN2", "LN3", "LN4")}
        variant_preset = CRICKET_VARIANTS[variant]
        if variant_preset is not None:
            overrides = self.block(variant_preset).get("overrides", {})
            blocks = {
                name: deep_merge(block, overrides.get(name, {})) for name, block in blocks.items()
            }
        ln2, ln3, ln4 = blocks["LN2"], blocks["LN3"], blocks["LN4"]
        return CricketPresets(
            variant=variant,
            ln2_neuron=NeuronParams.from_mapping(_require(ln2, "neuron", "LN2")),
            ln2_input=_synapse(_require(ln2, "input", "LN2"), Polarity.EXCITATORY),
            ln3_neuron=NeuronParams.from_mapping(_require(ln3, "neuron", "LN3")),
            ln3_input=_synapse(_require(ln3, "input", "LN3"), Polarity.EXCITATORY),
            ln3_delay=DelayElementConfig.from_mapping(_require(ln3, "delay", "LN3")),
            ln4_neuron=NeuronParams.from_mapping(_require(ln4, "neuron", "LN4")),
            ln4_excitation=_synapse(_require(ln4, "excitation", "LN4"), Polarity.EXCITATORY),
            ln4_inhibition=_synapse(_require(ln4, "inhibition", "LN4"), Polarity.INHIBITORY),
        )

    def polychronous(self, name: str = "polychronous") -> PolychronousPreset:
        block = self.block(name)
        return PolychronousPreset(
            base=str(_require(block, "base", name)),
            delays=tuple(tuple(float(d) for d in row) for row in _require(block, "delays", name)),
            target_v_max=float(_require(block, "target_v_max", name)),
            pattern_onsets=tuple(float(t) for t in _require(block, "pattern_onsets", name)),
            coincidence_fraction=float(_require(block, "coincidence_fraction", name)),
            duration=float(_require(block, "duration", name)),
            provenance=str(block.get("provenance", "")),
        )

    def merged(self, overrides: Mapping[str, Any]) -> PresetBook:
        if not overrides:
            return self
        for name in sorted(overrides):
            logger.info("Applying preset override for %s", name)
        return PresetBook(presets=deep_merge(self.presets, overrides))

    def to_dict(self) -> dict[str, Any]:
        return {"schema_version": PRESETS_SCHEMA_VERSION, "presets": copy.deepcopy(self.presets)}


def validate_presets_payload(raw: Mapping[str, Any]) -> PresetBook:
    if raw.get("schema_version") != PRESETS_SCHEMA_VERSION:
        raise ValueError(f"Unsupported presets schema_version: {raw.get('schema_version')}")
    presets = raw.get("presets")
    if not isinstance(presets, dict) or not presets:
        raise ValueError("presets.presets must be a non-empty object.")
    return PresetBook(presets=copy.deepcopy(presets))


def load_presets() -> PresetBook:
    text = resources.files("synaptic_delay").joinpath("presets", PRESETS_RESOURCE).read_text(
        encoding="utf-8"
    )
    return validate_presets_payload(json.loads(text))
