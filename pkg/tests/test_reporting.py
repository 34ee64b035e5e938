from __future__ import annotations

import json
import math
from pathlib import Path

import pytest

from synaptic_delay.models import ExperimentReport
from synaptic_delay.reporting import (
    artifact_path,
    table_columns,
    write_json_report,
    write_report,
    write_table_csv,
)


def _report(**tables: list[dict[str, object]]) -> ExperimentReport:
    return ExperimentReport(
        experiment="stim-sweep",
        config={"seed": 7},
        config_hash="0123456789abcdef0123",
        provenance={"seed": 7, "dt": 0.01},
        tables=dict(tables),
        summary={"V_max": [1.5, math.nan]},
    )


@pytest.mark.unit
def test_artifact_path_uses_stable_format() -> None:
    path = artifact_path(
        report_dir=Path("reports"),
        experiment="characterize",
        config_hash="abcdef0123456789ffff",
        seed=1,
    )
    assert path.as_posix() == "reports/characterize_abcdef012345_seed1.json"


@pytest.mark.unit
def test_artifact_path_appends_table_name() -> None:
    path = artifact_path(
        report_dir=Path("out"),
        experiment="ipi-sweep",
        config_hash="abcdef0123456789",
        seed=3,
        table="trials",
        extension="csv",
    )
    assert path.as_posix() == "out/ipi-sweep_abcdef012345_seed3_trials.csv"


@pytest.mark.unit
def test_write_json_report_is_sorted_and_pretty(tmp_path: Path) -> None:
    path = tmp_path / "r.json"
    write_json_report(path, {"b": 2, "a": 1})
    assert path.read_text(encoding="utf-8") == '{\n  "a": 1,\n  "b": 2\n}\n'


@pytest.mark.unit
def test_write_json_report_maps_non_finite_values_to_null(tmp_path: Path) -> None:
    path = tmp_path / "nested" / "r.json"
    write_json_report(path, {"rows": [{"tau": math.nan}, {"tau": math.inf}], "ok": (1.0, 2.0)})
    parsed = json.loads(path.read_text(encoding="utf-8"))
    assert parsed == {"ok": [1.0, 2.0], "rows": [{"tau": None}, {"tau": None}]}


@pytest.mark.unit
def test_table_csv_leads_with_index_columns(tmp_path: Path) -> None:
    path = tmp_path / "t.csv"
    rows = [
        {"verdict": "correct", "trial": 0, "noise": 0.1, "false_positive_ipis": ""},
        {"verdict": "false-positive", "trial": 1, "noise": 0.1, "tau": math.nan},
    ]
    write_table_csv(path, rows)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines == [
        "noise,trial,false_positive_ipis,tau,verdict",
        "0.1,0,,,correct",
        "0.1,1,,,false-positive",
    ]


@pytest.mark.unit
def test_table_csv_joins_list_cells(tmp_path: Path) -> None:
    path = tmp_path / "grid.csv"
    write_table_csv(path, [{"window": [10.0, math.inf], "ln4_weight": 13.0, "ln3_weight": 85.0}])
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines == ["ln3_weight,ln4_weight,window", "85.0,13.0,10.0;"]
    assert table_columns([{"time": 0.1, "LN2": 0.0}, {"LN4": 1.0}]) == ["time", "LN2", "LN4"]


@pytest.mark.unit
def test_table_csv_with_no_rows_writes_empty_file(tmp_path: Path) -> None:
    path = tmp_path / "empty.csv"
    write_table_csv(path, [])
    assert path.read_text(encoding="utf-8") == ""


@pytest.mark.unit
def test_write_report_json_only_by_default(tmp_path: Path) -> None:
    paths = write_report(_report(curve=[{"n_spikes": 1}]), tmp_path)
    assert [p.name for p in paths] == ["stim-sweep_0123456789ab_seed7.json"]
    payload = json.loads(paths[0].read_text(encoding="utf-8"))
    assert payload["experiment"] == "stim-sweep"
    assert payload["summary"]["V_max"] == [1.5, None]


@pytest.mark.unit
def test_write_report_csv_adds_one_file_per_table(tmp_path: Path) -> None:
    report = _report(trials=[{"ipi": 0.0}], curve=[{"n_spikes": 1}])
    paths = write_report(report, tmp_path, "csv")
    assert [p.name for p in paths] == [
        "stim-sweep_0123456789ab_seed7.json",
        "stim-sweep_0123456789ab_seed7_curve.csv",
        "stim-sweep_0123456789ab_seed7_trials.csv",
    ]
    assert paths[1].read_text(encoding="utf-8").splitlines() == ["n_spikes", "1"]


@pytest.mark.unit
def test_write_report_rejects_unknown_format(tmp_path: Path) -> None:
    with pytest.raises(ValueError, match="Unsupported report format"):
        write_report(_report(), tmp_path, "xlsx")
