"""Result files: trial tables, summaries and sweep tables.

Wall-clock runtimes are left out on purpose so that a given config and seed
always produce the same bytes.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

from .config import ScenarioConfig
from .runner import REJECTION_KINDS, ExperimentSummary, ModeComparison, SweepRow, TrialResult

TRIAL_COLUMNS = (
    "trial_index", "seed", "mode", "admitted_total", "admitted_cochannel",
    "served_ues", "unserved_ues", "mean_degradation", "max_degradation",
    *(f"rejected_{k}" for k in REJECTION_KINDS),
    "median_iot_sinr_db",
)
SWEEP_COLUMNS = ("param", "mode", "mean", "std", "ci95", "ratio")


def fmt(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.9g}"


def _cell(value) -> str:
    if isinstance(value, float):
        return fmt(value)
    return str(value)


def _jsonable(value):
    """Round floats to 9 significant digits; non-finite floats become null."""
    if isinstance(value, float):
        return float(fmt(value)) if math.isfinite(value) else None
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if dataclasses.is_dataclass(value):
        return _jsonable(dataclasses.asdict(value))
    return value


def trial_row(r: TrialResult) -> dict[str, Any]:
    row = {
        "trial_index": r.trial_index,
        "seed": r.seed,
        "mode": r.mode,
        "admitted_total": r.admitted_total,
        "admitted_cochannel": r.admitted_cochannel,
        "served_ues": r.served_ues,
        "unserved_ues": r.unserved_ues,
        "mean_degradation": r.mean_degradation,
        "max_degradation": r.max_degradation,
    }
    for k in REJECTION_KINDS:
        row[f"rejected_{k}"] = r.rejections.get(k, 0)
    row["median_iot_sinr_db"] = r.median_iot_sinr_db
    return row


def sweep_row(r: SweepRow) -> dict[str, Any]:
    return {c: getattr(r, c) for c in SWEEP_COLUMNS}


def write_table(path: Path, columns: Sequence[str], rows: Iterable[dict], fmt_: str = "csv") -> Path:
    rows = list(rows)
    if fmt_ == "json":
        path = path.with_suffix(".json")
        path.write_text(json.dumps(_jsonable(rows), indent=2) + "\n", encoding="utf-8")
        return path
    with open(path.with_suffix(".csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row[c]) for c in columns])
    return path.with_suffix(".csv")


def write_json(path: Path, payload) -> Path:
    path.write_text(json.dumps(_jsonable(payload), indent=2) + "\n", encoding="utf-8")
    return path


def summary_payload(config: ScenarioConfig, summaries: Sequence[ExperimentSummary]) -> dict[str, Any]:
    return {
        "master_seed": config.master_seed,
        "trials": config.trials,
        "config": config.to_dict(),
        "results": [dataclasses.asdict(s) for s in summaries],
    }


def comparison_rows(cmp: ModeComparison) -> list[dict[str, Any]]:
    modes = list(cmp.counts)
    seeds = {r.trial_index: r.seed for r in cmp.results.get("none", [])}
    rows = []
    for k, idx in enumerate(cmp.trial_indices):
        row = {"trial_index": idx, "seed": seeds.get(idx, "")}
        for m in modes:
            row[m] = cmp.counts[m][k]
        for m in modes[1:]:
            row[f"ratio_{m}"] = cmp.ratios[m][k]
        rows.append(row)
    return rows


def comparison_payload(config: ScenarioConfig, cmp: ModeComparison) -> dict[str, Any]:
    return {
        "master_seed": config.master_seed,
        "trials": config.trials,
        "config": config.to_dict(),
        "mean_ratio": cmp.mean_ratio,
        "ratio_of_means": cmp.ratio_of_means,
        "min_difference": {m: min(d) for m, d in cmp.differences.items()},
        "seeds_with_loss": {m: sum(1 for x in d if x < 0) for m, d in cmp.differences.items()},
    }
