"""Round record persistence: rounds.csv and summary.json.

Floats are written with repr, the shortest string that round-trips to the
identical double, so parsing a records file reproduces the in-memory
metrics exactly and repeated runs of the same config produce byte-identical
files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .simulator import RoundMetrics, RunResult

COLUMNS = ("round", "sim_time_s", "loss", "weighted_grad_sq", "eps_k",
           "budget_bits_mean", "bits_up_total", "bits_down_total",
           "bw_true_mean", "bw_est_mean", "k_mean", "overrun")

_INT_COLUMNS = {"round", "bits_up_total", "bits_down_total", "overrun"}


def write_rounds(path, rounds):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(COLUMNS)
        for r in rounds:
            writer.writerow([
                getattr(r, c) if c in _INT_COLUMNS else repr(getattr(r, c))
                for c in COLUMNS
            ])


def read_rounds(path):
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != COLUMNS:
            raise ValueError(f"{path}: unexpected columns {header}")
        out = []
        for row in reader:
            vals = {c: (int(v) if c in _INT_COLUMNS else float(v))
                    for c, v in zip(COLUMNS, row)}
            out.append(RoundMetrics(**vals))
    return out


def write_summary(path, result: RunResult):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(result.summary(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_result(out_dir, result: RunResult, stem: str = "rounds"):
    """Write <out>/<stem>.csv and <out>/summary.json; returns the csv path."""
    out_dir = Path(out_dir)
    csv_path = out_dir / f"{stem}.csv"
    write_rounds(csv_path, result.rounds)
    write_summary(out_dir / "summary.json", result)
    return csv_path
