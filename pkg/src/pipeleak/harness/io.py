"""Plot-ready CSV and JSON outputs."""
from __future__ import annotations

import json
import math
from pathlib import Path

from ..kernels import GainProfile
from .runner import COLUMNS, RunRecord

GAIN_COLUMNS = ("x", "p1", "p2", "p1_scaled", "p2_scaled")


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    return repr(float(value))


def write_csv(path: Path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def write_timeseries(record: RunRecord, out_dir) -> Path:
    return write_csv(Path(out_dir) / "timeseries.csv", COLUMNS, record.columns())


def write_gains(gains: GainProfile, out_dir) -> Path:
    return write_csv(Path(out_dir) / "gains.csv", GAIN_COLUMNS, gains.as_table())


def _clean(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if hasattr(value, "item"):
        return _clean(value.item())
    return value


def write_metrics(metrics: dict, out_dir) -> Path:
    path = Path(out_dir) / "metrics.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_clean(metrics), indent=2, sort_keys=True) + "\n")
    return path


def write_gnuplot(out_dir) -> Path:
    """Small gnuplot script for the estimate trajectories in ``timeseries.csv``."""
    path = Path(out_dir) / "plot_estimates.gp"
    path.write_text(
        "set datafile separator ','\n"
        "set key autotitle columnhead\n"
        "set multiplot layout 2,1\n"
        "set ylabel 'chi_hat [m^3/s]'\n"
        "plot 'timeseries.csv' using 1:8 with lines\n"
        "set ylabel 'delta_hat [m]'\n"
        "set xlabel 't [s]'\n"
        "plot 'timeseries.csv' using 1:9 with lines\n"
        "unset multiplot\n"
    )
    return path
