#!/usr/bin/env python3
"""Regenerate the golden record files under figures/golden/.

Three deterministic runs:

* quad_kimad: adaptive run on a layered quadratic under a slow sinusoid,
  sized so the chosen sparsity never pins to the floor or the lossless
  ceiling; feeds the loss and throughput plots.
* lsq_kimad / lsq_kimad_plus: the allocation comparison pair on the
  ten-layer least-squares model at constant bandwidth with a shared step
  size; feeds the compression-error plot.

The outputs are committed; this script only needs re-running when record
columns or the underlying engine change.
"""

import sys
from dataclasses import replace
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from kimad import records
from kimad.simulator import BandwidthConfig, ObjectiveConfig, SimConfig, run

GOLDEN = Path(__file__).resolve().parent.parent / "figures" / "golden"


def quad_kimad() -> SimConfig:
    return SimConfig(
        mode="kimad",
        objective=ObjectiveConfig(kind="quadratic", dim=150, layers=(50, 50, 50)),
        bandwidth=BandwidthConfig(kind="sinusoidal", eta=2000.0, theta=0.01,
                                  delta=1000.0, downlink=False),
        workers=1,
        gamma=0.002,
        t_budget_s=1.0,
        t_comp_s=0.1,
        estimator="ewma",
        ewma_lambda=0.3,
        rounds=400,
        master_seed=11,
    )


def lsq_pair() -> SimConfig:
    return SimConfig(
        mode="kimad",
        objective=ObjectiveConfig(kind="lsq", dim=1000, layers=(100,) * 10,
                                  samples=200, batch=200),
        bandwidth=BandwidthConfig(kind="constant", value=4000.0, downlink=False),
        workers=1,
        gamma=0.05,
        t_budget_s=1.0,
        t_comp_s=0.1,
        estimator="ewma",
        ewma_lambda=0.3,
        rounds=300,
        master_seed=21,
    )


def main() -> int:
    GOLDEN.mkdir(parents=True, exist_ok=True)
    records.write_rounds(GOLDEN / "quad_kimad.csv", run(quad_kimad()).rounds)
    base = lsq_pair()
    records.write_rounds(GOLDEN / "lsq_kimad.csv", run(base).rounds)
    records.write_rounds(GOLDEN / "lsq_kimad_plus.csv",
                         run(replace(base, mode="kimad_plus")).rounds)
    for p in sorted(GOLDEN.glob("*.csv")):
        print(f"wrote {p}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
