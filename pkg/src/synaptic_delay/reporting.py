"""Deterministic report artifact naming and serialization."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, is_dataclass
from pathlib import Path
from typing import Any

from synaptic_delay.models import ExperimentReport

logger = logging.getLogger(__name__)

REPORT_FORMATS = ("json", "csv")

# Index columns lead in this order; the remaining columns follow alphabetically.
KEY_COLUMNS = (
    "noise",
    "ipi",
    "trial",
    "ln3_weight",
    "ln4_weight",
    "w_inh",
    "w_exc",
    "instance_id",
    "metric",
    "source",
    "detector",
    "neuron",
    "time",
)


def artifact_path(
    *,
    report_dir: Path,
    experiment: str,
    config_hash: str,
    seed: int,
    table: str | None = None,
    extension: str = "json",
) -> Path:
    suffix = f"_{table}" if table else ""
    filename = f"{experiment}_{config_hash[:12]}_seed{seed}{suffix}.{extension}"
    return report_dir / filename


def _json_safe(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {key: _json_safe(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(item) for item in value]
    return value


def write_json_report(path: Path, report: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = asdict(report) if is_dataclass(report) and not isinstance(report, type) else report
    text = json.dumps(_json_safe(payload), indent=2, sort_keys=True, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")


def table_columns(rows: list[dict[str, Any]]) -> list[str]:
    present = {key for row in rows for key in row}
    keys = [key for key in KEY_COLUMNS if key in present]
    return keys + sorted(present.difference(keys))


def _csv_cell(value: Any) -> Any:
    value = _json_safe(value)
    if isinstance(value, list):
        return ";".join("" if item is None else f"{item}" for item in value)
    return value


def write_table_csv(path: Path, rows: list[dict[str, Any]]) -> None:
    """Write one report table; list cells are ``;``-joined and non-finite numbers left empty."""
    path.parent.mkdir(parents=True, exist_ok=True)
    if not rows:
        path.write_text("", encoding="utf-8")
        return
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=table_columns(rows))
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _csv_cell(value) for key, value in row.items()})
    logger.debug("Wrote %d rows to %s", len(rows), path)


def write_report(report: ExperimentReport, report_dir: Path, fmt: str = "json") -> list[Path]:
    """Write ``report`` and return the artifact paths.

    The JSON document is always written. With ``fmt="csv"`` every table is also written
    as its own CSV file next to it.
    """
    if fmt not in REPORT_FORMATS:
        raise ValueError(f"Unsupported report format: {fmt}")
    seed = int(report.provenance.get("seed", 0))
    json_path = artifact_path(
        report_dir=report_dir,
        experiment=report.experiment,
        config_hash=report.config_hash,
        seed=seed,
    )
    write_json_report(json_path, report)
    paths = [json_path]
    if fmt == "csv":
        for table in sorted(report.tables):
            csv_path = artifact_path(
                report_dir=report_dir,
                experiment=report.experiment,
                config_hash=report.config_hash,
                seed=seed,
                table=table,
                extension="csv",
            )
            write_table_csv(csv_path, report.tables[table])
            paths.append(csv_path)
    logger.info("Wrote %d artifact(s) for %s", len(paths), report.experiment)
    return paths
