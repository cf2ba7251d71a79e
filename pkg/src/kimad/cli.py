"""Command line front end.

Subcommands:
  run     execute one configured run, write rounds.csv and summary.json
  sweep   run the fixed-K mode over a K grid, one records file per K
  verify  re-run the built-in correctness checks and print pass/fail
  oracle  solve an allocation problem file with the brute-force oracle

KIMAD_LOG={error|info|debug} controls log verbosity.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import allocator, records
from .config import ConfigError, load_config
from .simulator import SimConfig, best_fixed_k, run, sweep_fixed_k

log = logging.getLogger("kimad")

_DEFAULT_SWEEP = (1, 2, 4, 8, 16, 30)


def _setup_logging():
    level = os.environ.get("KIMAD_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    if level not in levels:
        print(f"warning: KIMAD_LOG={level!r} not understood, using error",
              file=sys.stderr)
    logging.basicConfig(level=levels.get(level, logging.ERROR),
                        format="%(levelname)s %(name)s: %(message)s")


def _load(args) -> SimConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.master_seed = args.seed
    if getattr(args, "mode", None) is not None:
        cfg.mode = args.mode
    if getattr(args, "rounds", None) is not None:
        cfg.rounds = args.rounds
    return cfg


def cmd_run(args) -> int:
    cfg = _load(args)
    result = run(cfg)
    csv_path = records.write_result(args.out, result)
    print(f"wrote {csv_path} ({len(result.rounds)} rounds, "
          f"final_loss={result.final_loss:.6g})")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load(args)
    ks = args.k if args.k else _DEFAULT_SWEEP
    results = sweep_fixed_k(cfg, ks)
    out = Path(args.out)
    summary = {}
    for k, res in sorted(results.items()):
        records.write_rounds(out / f"rounds_k{k}.csv", res.rounds)
        summary[str(k)] = res.summary()
    best = best_fixed_k(results)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.json", "w") as fh:
        json.dump({"best_k": best, "runs": summary}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {out}/sweep.json (best_k={best})")
    return 0


def cmd_oracle(args) -> int:
    with open(args.problem) as fh:
        spec = json.load(fh)
    layers = spec["layers"]
    problem = allocator.AllocationProblem(
        ks=[list(range(len(layer))) for layer in layers],
        costs=[[c for c, _ in layer] for layer in layers],
        errors=[[e for _, e in layer] for layer in layers],
        budget_bits=spec["budget_bits"],
        discretization=spec.get("discretization", 1000),
    )
    brute = allocator.allocate_bruteforce(problem)
    dp = allocator.allocate_dp(problem)
    out = {
        "bruteforce": {"choices": list(brute.choices),
                       "total_error": brute.total_error,
                       "total_cost_bits": brute.total_cost_bits},
        "dp": {"choices": list(dp.choices),
               "total_error": dp.total_error,
               "total_cost_bits": dp.total_cost_bits},
        "errors_agree": dp.total_error == brute.total_error,
    }
    text = json.dumps(out, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
        print(f"wrote {args.out}")
    else:
        print(text)
    return 0


# ---------------------------------------------------------------------------
# verify: quick self-checks mirroring the acceptance suite.


def _check(name, ok, detail=""):
    tag = "PASS" if ok else "FAIL"
    print(f"{tag} {name}" + (f" ({detail})" if detail else ""))
    return ok


def _verify_allocator(rng) -> bool:
    from .verifylib import random_exact_problem
    ok = True
    for _ in range(40):
        problem = random_exact_problem(rng)
        dp = allocator.allocate_dp(problem)
        brute = allocator.allocate_bruteforce(problem)
        ok = ok and dp.total_error == brute.total_error
    return _check("allocator dp matches brute force", ok, "40 random problems")


def _verify_theory(rng) -> bool:
    from .verifylib import theory_check
    worst_c, worst_d, all_bounded = -np.inf, -np.inf, True
    for _ in range(3):
        trace = theory_check(rng, rounds=2000)
        worst_c = max(worst_c, trace.max_contraction_violation)
        worst_d = max(worst_d, trace.max_descent_violation)
        all_bounded = all_bounded and trace.mean_weighted_grad_sq <= trace.bound
    ok = all_bounded and worst_c <= 1e-9 and worst_d <= 1e-9
    return _check("stationarity bound and per-step inequalities", ok,
                  f"contraction<={worst_c:.2e} descent<={worst_d:.2e}")


def _verify_budget(rng) -> bool:
    from .verifylib import budget_compliance_config
    cfg = budget_compliance_config(seed=int(rng.integers(2 ** 31)), rounds=300)
    res = run(cfg)
    ok = True
    for d in res.details:
        for m in range(cfg.workers):
            if not d.clamped_up[m]:
                ok = ok and d.bits_up[m] <= d.budgets_up[m]
            ok = ok and d.round_times[m] <= cfg.t_budget_s + 1e-9
        if not d.clamped_down and d.budget_down is not None:
            ok = ok and d.bits_down <= d.budget_down
    return _check("budget compliance at true-rate estimates", ok, "300 rounds")


def _verify_gd(rng) -> bool:
    from .verifylib import gd_equivalence
    return _check("dense baseline equals plain gradient descent", gd_equivalence(
        seed=int(rng.integers(2 ** 31)), rounds=50), "bitwise, 50 rounds")


def _verify_determinism(rng) -> bool:
    from .verifylib import budget_compliance_config
    cfg = budget_compliance_config(seed=int(rng.integers(2 ** 31)), rounds=50)
    a, b = run(cfg), run(cfg)
    return _check("repeat run reproduces identical records",
                  a.rounds == b.rounds, "50 rounds")


def cmd_verify(args) -> int:
    rng = np.random.default_rng(args.seed if args.seed is not None else 2024)
    results = [
        _verify_allocator(rng),
        _verify_theory(rng),
        _verify_budget(rng),
        _verify_gd(rng),
        _verify_determinism(rng),
    ]
    print(f"{sum(results)}/{len(results)} checks passed")
    return 0 if all(results) else 1


def main(argv=None) -> int:
    _setup_logging()
    parser = argparse.ArgumentParser(prog="kimad",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one configured run")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--mode")
    p_run.add_argument("--rounds", type=int)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="fixed-K grid search")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--seed", type=int)
    p_sweep.add_argument("--rounds", type=int)
    p_sweep.add_argument("--k", type=lambda s: [int(p) for p in s.split(",")],
                         help="comma-separated K values")
    p_sweep.set_defaults(func=cmd_sweep)

    p_verify = sub.add_parser("verify", help="run built-in correctness checks")
    p_verify.add_argument("--seed", type=int)
    p_verify.set_defaults(func=cmd_verify)

    p_oracle = sub.add_parser("oracle", help="brute-force an allocation problem file")
    p_oracle.add_argument("--problem", required=True)
    p_oracle.add_argument("--out")
    p_oracle.set_defaults(func=cmd_oracle)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        log.debug("unhandled failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
