#!/usr/bin/env python3
"""Plot training record files.

Consumes rounds.csv files produced by the simulator and renders one figure:

  plot.py --kind loss       --in run_a.csv run_b.csv ... --out loss.svg
  plot.py --kind throughput --in run.csv                 --out tp.svg
  plot.py --kind eps        --in kimad.csv kimad_plus.csv --out eps.svg

loss        loss against simulated time, one curve per input file;
throughput  per-round uplink bits and the true link rate on twin axes,
            plus a printed Pearson correlation between the two, computed
            over the non-saturated rounds (rows pinned at the file's own
            minimum or maximum bit count are excluded; if that leaves
            fewer than three rows, all rows are used);
eps         per-round compression error, one curve per input file.

Output format follows the --out extension; SVG is the intended one and is
byte-stable for identical inputs (fixed figure geometry, salted SVG ids,
no embedded timestamps). Inputs are opened read-only and never modified.
"""

import argparse
import csv
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

plt.rcParams["svg.hashsalt"] = "record-figures"
plt.rcParams["figure.figsize"] = (6.4, 4.0)

EXPECTED_HEADER = ("round", "sim_time_s", "loss", "weighted_grad_sq", "eps_k",
                   "budget_bits_mean", "bits_up_total", "bits_down_total",
                   "bw_true_mean", "bw_est_mean", "k_mean", "overrun")


def read_records(path):
    """Columns of one rounds.csv as {name: float ndarray}."""
    with open(path, "r", newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != EXPECTED_HEADER:
            raise SystemExit(f"{path}: unexpected columns {reader.fieldnames}")
        rows = list(reader)
    if not rows:
        raise SystemExit(f"{path}: no data rows")
    return {name: np.array([float(r[name]) for r in rows])
            for name in EXPECTED_HEADER}


def _finish(fig, out):
    fig.tight_layout()
    kwargs = {}
    if Path(out).suffix.lower() == ".svg":
        kwargs["metadata"] = {"Date": None}
    fig.savefig(out, **kwargs)
    plt.close(fig)
    print(f"wrote {out}")


def plot_loss(inputs, out):
    fig, ax = plt.subplots()
    for path in inputs:
        cols = read_records(path)
        ax.plot(cols["sim_time_s"], cols["loss"], label=Path(path).stem, lw=1.2)
    ax.set_xlabel("simulated time (s)")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.legend()
    _finish(fig, out)


def plot_throughput(inputs, out):
    if len(inputs) != 1:
        raise SystemExit("throughput takes exactly one input file")
    cols = read_records(inputs[0])
    bits, bw = cols["bits_up_total"], cols["bw_true_mean"]

    mask = (bits > bits.min()) & (bits < bits.max())
    if mask.sum() < 3:
        mask = np.ones(bits.size, dtype=bool)
    r = float(np.corrcoef(bits[mask], bw[mask])[0, 1])
    print(f"pearson_r={r!r} (n={int(mask.sum())} non-saturated rounds)")

    fig, ax = plt.subplots()
    ax.plot(cols["round"], bits, color="tab:blue", lw=1.2,
            label="uplink bits per round")
    ax.set_xlabel("round")
    ax.set_ylabel("uplink bits per round", color="tab:blue")
    ax.tick_params(axis="y", labelcolor="tab:blue")
    ax2 = ax.twinx()
    ax2.plot(cols["round"], bw, color="tab:orange", lw=1.2, ls="--",
             label="true link rate")
    ax2.set_ylabel("link rate (bit/s)", color="tab:orange")
    ax2.tick_params(axis="y", labelcolor="tab:orange")
    ax.set_title(f"throughput follows the link (r={r:.3f})")
    _finish(fig, out)


def plot_eps(inputs, out):
    fig, ax = plt.subplots()
    positive = True
    for path in inputs:
        cols = read_records(path)
        positive = positive and bool((cols["eps_k"] > 0).all())
        ax.plot(cols["round"], cols["eps_k"], label=Path(path).stem, lw=1.2)
    ax.set_xlabel("round")
    ax.set_ylabel("compression error")
    if positive:
        ax.set_yscale("log")
    ax.legend()
    _finish(fig, out)


KINDS = {"loss": plot_loss, "throughput": plot_throughput, "eps": plot_eps}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--kind", choices=sorted(KINDS), required=True)
    ap.add_argument("--in", dest="inputs", nargs="+", required=True,
                    metavar="CSV", help="rounds.csv record files")
    ap.add_argument("--out", required=True, help="output image (.svg or .png)")
    args = ap.parse_args(argv)
    KINDS[args.kind](args.inputs, args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
