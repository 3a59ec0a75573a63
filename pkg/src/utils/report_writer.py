"""
Experiment report persistence.

Reports are written as JSON with sorted keys so identical configurations give
identical files apart from `wall_time`. Per-trial rows go to CSV through
pandas, and saved reports can be summarized as a DataFrame.
"""

import json
import math
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from config.config import REPORTS_DIR
from src.utils.data_models import ExperimentReport


class ReportEncoder(json.JSONEncoder):
    """Encode numpy scalars and arrays as plain JSON values."""

    def default(self, obj):
        if isinstance(obj, np.integer):
            return int(obj)
        if isinstance(obj, np.floating):
            return float(obj)
        if isinstance(obj, np.bool_):
            return bool(obj)
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, Path):
            return str(obj)
        return super().default(obj)


def _finite(value: Any) -> Any:
    """Replace NaN and infinities with None, recursively."""
    if isinstance(value, dict):
        return {k: _finite(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(v) for v in value]
    if isinstance(value, (float, np.floating)) and not math.isfinite(float(value)):
        return None
    return value


def default_report_path(experiment: str, seed: int) -> Path:
    return REPORTS_DIR / f"{experiment}_{seed}.json"


def report_json(report: ExperimentReport) -> str:
    return json.dumps(_finite(report.to_json_dict()), indent=2, sort_keys=True, cls=ReportEncoder)


def save_report(report: ExperimentReport, path: Optional[str] = None) -> Path:
    """
    Write the report as JSON.

    Args:
        report: Finished experiment report
        path: Output file; defaults to data/reports/<experiment>_<seed>.json

    Returns:
        Path the report was written to
    """
    out = Path(path) if path else default_report_path(report.experiment, report.seed)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as f:
        f.write(report_json(report) + "\n")
    return out


def save_rows_csv(rows: List[Dict[str, Any]], path: str) -> Path:
    """Per-trial rows as CSV (one column per key)."""
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows).to_csv(out, index=False)
    return out


def load_report(path: str) -> Dict[str, Any]:
    with open(path, "r") as f:
        return json.load(f)


def list_reports(directory: Optional[Path] = None) -> pd.DataFrame:
    """
    One row per saved report: experiment, seed, trials, passed, wall_time, file.

    Returns an empty frame with those columns when nothing is saved yet.
    """
    columns = ["experiment", "seed", "trials", "passed", "wall_time", "file"]
    directory = Path(directory) if directory else REPORTS_DIR
    if not directory.exists():
        return pd.DataFrame(columns=columns)

    records = []
    for report_file in sorted(directory.glob("*.json")):
        try:
            data = load_report(str(report_file))
        except json.JSONDecodeError as e:
            print(f"Warning: skipping unreadable report {report_file}: {str(e)}")
            continue
        records.append({
            "experiment": data.get("experiment"),
            "seed": data.get("seed"),
            "trials": data.get("trials"),
            "passed": data.get("passed"),
            "wall_time": data.get("wall_time"),
            "file": report_file.name,
        })
    return pd.DataFrame(records, columns=columns)


def summarize_reports(directory: Optional[Path] = None) -> Dict[str, Any]:
    """Pass counts per experiment, aggregated with pandas."""
    df = list_reports(directory)
    if df.empty:
        return {"total_reports": 0, "passed": 0, "by_experiment": {}}
    by_experiment = df.groupby("experiment").agg(
        runs=("file", "count"),
        passed=("passed", "sum"),
        mean_wall_time=("wall_time", "mean"),
    ).to_dict("index")
    return {
        "total_reports": int(len(df)),
        "passed": int(df["passed"].sum()),
        "by_experiment": by_experiment,
    }
