"""Synchronous parameter-server training simulator.

One simulated round: the server compresses and broadcasts its model delta;
every worker applies it, computes a (possibly stochastic) gradient at its
model mirror, compresses and uploads its gradient delta; the server folds
the uploads and takes a step. The wall clock advances by the slowest
worker's downlink + compute + uplink time, with transfer times read off
per-link bandwidth traces (rate frozen at transfer start).

Modes differ only in how per-layer compressors are chosen each round:

* uncompressed: dense model down, dense gradients up (the plain baseline);
* ef21: a fixed TopK/RandK sparsity per layer, regardless of bandwidth;
* kimad: a bit budget from the estimated link rate and the round time
  target, split across layers proportionally to their dimension;
* kimad_plus: the same budget, allocated across layers by the knapsack
  dynamic program on the actual vector being sent.

Everything is driven by a single master seed; two runs of the same config
produce identical records.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import allocator, budget as budget_mod, ef21, tensor
from .allocator import DEFAULT_RATIO_GRID, AllocationError
from .bandwidth import (BandwidthEstimator, ConstantTrace, SinusoidalTrace,
                        TwoLevelTrace, ingest_trace_file, trace_at)
from .compressors import IDENTITY, TOPK, CompressorSpec, entry_bits, k_for_budget
from .objectives import LayeredLsqObjective, QuadraticObjective
from .tensor import LayerPartition, LayeredVector

log = logging.getLogger("kimad")

MODES = ("uncompressed", "ef21", "kimad", "kimad_plus")

_OVERRUN_SLACK = 1e-9

# Sub-stream tags hung off the master seed so independent randomness never
# shares a stream.
_SEED_OBJECTIVE = 1
_SEED_X0 = 2
_SEED_NOISE = 3
_SEED_BATCH = 4
_SEED_RANDK = 5
_DIR_UP, _DIR_DOWN = 0, 1


class SimulationError(RuntimeError):
    """A run failed midway (typically numeric divergence)."""


@dataclass
class ObjectiveConfig:
    kind: str = "quadratic"          # quadratic | lsq
    dim: int = 30
    layers: tuple = (10, 10, 10)     # explicit layer sizes
    seed: int | None = None          # defaults to a master-seed stream
    a_min: float = 1.0               # quadratic curvature range, log-uniform
    a_max: float = 100.0
    samples: int = 200               # lsq rows
    batch: int = 50
    target_noise: float = 0.1
    scale_min: float = 0.3
    scale_max: float = 3.0


@dataclass
class BandwidthConfig:
    kind: str = "sinusoidal"         # sinusoidal | twolevel | constant | file
    eta: float = 300e6
    theta: float = 1.0
    delta: float = 30e6
    noise_std: float = 0.0
    low: float = 1e6
    high: float = 10e6
    period: float = 5.0
    value: float = 10e6              # constant
    path: str = ""                   # file
    prior: float | str = "auto"      # estimator warm start; auto = window mean
    downlink: bool = True            # False: broadcast is free and exact


@dataclass
class SimConfig:
    mode: str = "kimad"
    objective: ObjectiveConfig = field(default_factory=ObjectiveConfig)
    bandwidth: BandwidthConfig = field(default_factory=BandwidthConfig)
    workers: int = 1
    weights: tuple | None = None     # normalized; uniform when omitted
    gamma: float | str = "theory"
    t_budget_s: float = 1.0
    t_comp_s: float | str = "auto"   # auto = dense model bits / mean bandwidth
    alpha_down: float = 1.0
    family: str = TOPK               # sparsifier for ef21/kimad/kimad_plus
    fixed_k: int = 1                 # ef21 mode
    ratio_grid: tuple | None = None  # kimad_plus candidates
    discretization: int = 1000
    value_bits: int = 32
    estimator: str = "ewma"          # ewma | oracle (oracle = true frozen rate)
    ewma_lambda: float = 0.3
    rounds: int = 100
    warmup_rounds: int = 0
    master_seed: int = 21


@dataclass
class RoundMetrics:
    """One persisted record per round; exactly the columns of rounds.csv."""

    round: int
    sim_time_s: float
    loss: float
    weighted_grad_sq: float
    eps_k: float
    budget_bits_mean: float
    bits_up_total: int
    bits_down_total: int
    bw_true_mean: float
    bw_est_mean: float
    k_mean: float
    overrun: int


@dataclass
class RoundDetail:
    """Unpersisted per-round diagnostics for tests and debugging."""

    budgets_up: tuple
    budget_down: float | None
    bits_up: tuple
    bits_down: int
    clamped_up: tuple
    clamped_down: bool
    round_times: tuple
    gamma: float
    ks_up: tuple


@dataclass
class RunResult:
    config: SimConfig
    rounds: list
    details: list
    final_loss: float
    final_x: LayeredVector
    t_comp_s: float

    @property
    def total_sim_time_s(self) -> float:
        return self.rounds[-1].sim_time_s if self.rounds else 0.0

    @property
    def total_bits(self) -> int:
        return sum(r.bits_up_total + r.bits_down_total for r in self.rounds)

    @property
    def clamped_rounds(self) -> int:
        return sum(1 for d in self.details
                   if any(d.clamped_up) or d.clamped_down)

    def summary(self) -> dict:
        n = len(self.rounds)
        return {
            "mode": self.config.mode,
            "rounds": n,
            "master_seed": self.config.master_seed,
            "final_loss": self.final_loss,
            "total_sim_time_s": self.total_sim_time_s,
            "mean_step_time_s": self.total_sim_time_s / n if n else 0.0,
            "total_bits": self.total_bits,
            "clamped_rounds": self.clamped_rounds,
            "t_comp_s": self.t_comp_s,
        }


def compression_error(u_list, u_hat_list) -> float:
    """Mean over workers of ||u_hat - u||^2 after the round's upload."""
    errs = [tensor.sq_norm(tensor.sub(u_hat, u))
            for u, u_hat in zip(u_list, u_hat_list)]
    return float(np.mean(errs))


def select_compressor(mode: str, budget_bits: float, u_delta: LayeredVector,
                      *, ratio_grid=None, discretization: int = 1000,
                      value_bits: int = 32, fixed_k: int = 1,
                      family: str = TOPK):
    """Choose per-layer compressors for one message.

    Returns (specs, clamped). clamped marks rounds where the budget could
    not even pay for the mandatory minimum of one entry per layer, so the
    message intentionally overshoots the budget rather than stalling.
    """
    part = u_delta.partition
    sizes = part.sizes
    if mode == "uncompressed":
        return [CompressorSpec(IDENTITY) for _ in sizes], False
    if mode == "ef21":
        return [CompressorSpec(family, min(fixed_k, d)) for d in sizes], False
    if mode == "kimad":
        total = part.dim
        specs, clamped = [], False
        for d in sizes:
            share = budget_bits * d / total
            k = k_for_budget(share, d, value_bits)
            if share < entry_bits(d, value_bits):
                clamped = True
            specs.append(CompressorSpec(family, k))
        return specs, clamped
    if mode == "kimad_plus":
        grid = DEFAULT_RATIO_GRID if ratio_grid is None else ratio_grid
        # Seed the menus with the proportional split so the DP dominates it.
        proportional = [k_for_budget(budget_bits * d / part.dim, d, value_bits)
                        for d in sizes]
        problem = allocator.build_tables(u_delta, grid, budget_bits,
                                         discretization, value_bits, family,
                                         extra_ks=proportional)
        try:
            alloc = allocator.allocate_dp(problem)
        except AllocationError:
            # Cheapest full selection does not fit: fall back to it anyway.
            ks = [min(layer_ks) for layer_ks in problem.ks]
            return [CompressorSpec(family, k) for k in ks], True
        ks = [problem.ks[i][j] for i, j in enumerate(alloc.choices)]
        return [CompressorSpec(family, k) for k in ks], False
    raise ValueError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# Engine internals.


def _build_partition(oc: ObjectiveConfig) -> LayerPartition:
    part = LayerPartition.from_sizes(oc.layers)
    if part.dim != oc.dim:
        raise ValueError(f"layer sizes {oc.layers} sum to {part.dim}, not dim {oc.dim}")
    return part


def _build_objective(oc: ObjectiveConfig, master_seed: int):
    seed = oc.seed if oc.seed is not None else [master_seed, _SEED_OBJECTIVE]
    if oc.kind == "quadratic":
        part = _build_partition(oc)
        return QuadraticObjective.random(part, seed, oc.a_min, oc.a_max)
    if oc.kind == "lsq":
        obj = LayeredLsqObjective.random(
            list(oc.layers), oc.samples, oc.batch,
            seed if isinstance(seed, int) else int(np.random.default_rng(seed).integers(2 ** 31)),
            oc.scale_min, oc.scale_max, oc.target_noise)
        if obj.partition.dim != oc.dim:
            raise ValueError(f"layer sizes {oc.layers} sum to {obj.partition.dim}, not {oc.dim}")
        return obj
    raise ValueError(f"unknown objective kind {oc.kind!r}")


def _base_trace(bc: BandwidthConfig, seed: int = 0, noise: bool = True):
    if bc.kind == "sinusoidal":
        std = bc.noise_std if noise else 0.0
        return SinusoidalTrace(bc.eta, bc.theta, bc.delta, std, seed)
    if bc.kind == "twolevel":
        return TwoLevelTrace(bc.low, bc.high, bc.period)
    if bc.kind == "constant":
        return ConstantTrace(bc.value)
    if bc.kind == "file":
        return ingest_trace_file(bc.path)
    raise ValueError(f"unknown bandwidth kind {bc.kind!r}")


def _link_trace(bc: BandwidthConfig, master_seed: int, worker: int, direction: int):
    if bc.kind == "sinusoidal" and bc.noise_std > 0:
        seed_ints = [master_seed, _SEED_NOISE, worker, direction]
        seed = int(np.random.default_rng(seed_ints).integers(2 ** 62))
        return SinusoidalTrace(bc.eta, bc.theta, bc.delta, bc.noise_std, seed)
    if bc.kind == "file":
        try:
            return ingest_trace_file(bc.path, worker_id=worker)
        except Exception:
            return ingest_trace_file(bc.path)
    return _base_trace(bc)


def _window_mean_rate(bc: BandwidthConfig, window_s: float) -> float:
    """Time-average of the noise-free pattern over [0, window_s]."""
    base = _base_trace(bc, noise=False)
    ts = np.linspace(0.0, window_s, 1024)
    return float(np.mean([trace_at(base, t) for t in ts]))


class _GammaPolicy:
    """Per-round step size: a fixed number, or the theory bound for the
    round's effective per-layer contraction coefficients (memoized)."""

    def __init__(self, cfg: SimConfig, objective, partition):
        self.fixed = None if cfg.gamma == "theory" else float(cfg.gamma)
        if self.fixed is not None and self.fixed <= 0:
            raise ValueError(f"gamma must be positive, got {cfg.gamma}")
        self.sizes = partition.sizes
        self.l_layers, self.l_global = objective.smoothness_constants()
        self._cache = {}

    def gamma(self, ks: tuple) -> float:
        if self.fixed is not None:
            return self.fixed
        got = self._cache.get(ks)
        if got is None:
            alphas = [k / d for k, d in zip(ks, self.sizes)]
            params = ef21.TheoryParams.from_alphas(alphas, self.l_layers, self.l_global)
            got = ef21.max_stepsize(params)
            self._cache[ks] = got
        return got


def run(config: SimConfig) -> RunResult:
    """Execute a full simulated training run. Deterministic per config."""
    if config.mode not in MODES:
        raise ValueError(f"unknown mode {config.mode!r}, pick one of {MODES}")
    if config.rounds < 1:
        raise ValueError(f"rounds must be >= 1, got {config.rounds}")
    if config.workers < 1:
        raise ValueError(f"workers must be >= 1, got {config.workers}")

    master = config.master_seed
    glob_obj = _build_objective(config.objective, master)
    part = glob_obj.partition
    m_workers = config.workers

    if config.weights is None:
        weights = np.full(m_workers, 1.0 / m_workers)
    else:
        weights = np.asarray(config.weights, dtype=np.float64)
        if weights.size != m_workers or np.any(weights <= 0):
            raise ValueError("need one positive weight per worker")
        weights = weights / weights.sum()

    if isinstance(glob_obj, LayeredLsqObjective) and m_workers > 1:
        worker_objs = glob_obj.split(m_workers)
    else:
        worker_objs = [glob_obj] * m_workers
    stochastic = (isinstance(glob_obj, LayeredLsqObjective)
                  and worker_objs[0].batch_size < worker_objs[0].num_samples)

    window = max(1, config.warmup_rounds) * config.t_budget_s
    mean_rate = _window_mean_rate(config.bandwidth, window)
    if config.t_comp_s == "auto":
        t_comp = part.dim * config.value_bits / mean_rate
    else:
        t_comp = float(config.t_comp_s)
    tm = budget_mod.TimeModel(config.t_budget_s, t_comp, config.alpha_down)

    prior = mean_rate if config.bandwidth.prior == "auto" else float(config.bandwidth.prior)
    up_traces = [_link_trace(config.bandwidth, master, m, _DIR_UP)
                 for m in range(m_workers)]
    down_traces = [_link_trace(config.bandwidth, master, m, _DIR_DOWN)
                   for m in range(m_workers)]
    oracle_est = config.estimator == "oracle"
    if config.estimator not in ("ewma", "oracle"):
        raise ValueError(f"unknown estimator kind {config.estimator!r}")
    up_est = [BandwidthEstimator(config.ewma_lambda, prior) for _ in range(m_workers)]
    down_est = [BandwidthEstimator(config.ewma_lambda, prior) for _ in range(m_workers)]

    x0 = LayeredVector(np.random.default_rng([master, _SEED_X0]).standard_normal(part.dim), part)
    server, workers = ef21.init_states(x0, m_workers)
    gamma_policy = _GammaPolicy(config, glob_obj, part)
    downlink_on = config.bandwidth.downlink
    uplink_budget = (budget_mod.compression_budget if downlink_on
                     else budget_mod.one_way_budget)

    def sel(budget_bits, delta, warm):
        if warm:
            return [CompressorSpec(IDENTITY) for _ in part.sizes], False
        return select_compressor(
            config.mode, budget_bits, delta, ratio_grid=config.ratio_grid,
            discretization=config.discretization, value_bits=config.value_bits,
            fixed_k=config.fixed_k, family=config.family)

    def with_randk_seeds(specs, k, m, direction):
        return [replace(s, seed=(master, _SEED_RANDK, k, m, i, direction))
                if s.kind == "randk" else s
                for i, s in enumerate(specs)]

    meta_mode = config.mode == "uncompressed"
    dense_bits = part.dim * config.value_bits
    rounds_out, details_out = [], []
    sim_time = 0.0

    for k in range(config.rounds):
        warm = k < config.warmup_rounds
        try:
            loss = glob_obj.value(server.x)
            grad = glob_obj.grad(server.x)
        except ValueError as exc:
            raise SimulationError(f"non-finite model at round {k}: {exc}") from exc
        if not math.isfinite(loss) or loss > 1e250:
            raise SimulationError(f"diverged at round {k}: loss={loss}")
        weighted_grad_sq = tensor.sq_norm(grad)

        # Downlink phase: pick one broadcast that respects the slowest link.
        if downlink_on:
            down_rates = [trace_at(tr, sim_time) for tr in down_traces]
            down_ests = (down_rates if oracle_est
                         else [e.estimate() for e in down_est])
            budget_down = min(budget_mod.downlink_budget(b, tm) for b in down_ests)
            if meta_mode:
                # Dense broadcast of the model itself; mirrors snap to x.
                clamped_down = False
                bits_down = dense_bits
                server.x_hat = server.x.copy()
                for w in workers:
                    w.x_hat = server.x.copy()
            else:
                delta_x = tensor.sub(server.x, server.x_hat)
                specs_down, clamped_down = sel(budget_down, delta_x, warm)
                specs_down = with_randk_seeds(specs_down, k, -1, _DIR_DOWN)
                msg_down = ef21.server_broadcast_step(server, specs_down,
                                                      config.value_bits)
                bits_down = msg_down.bit_cost
                for w in workers:
                    ef21.worker_receive(w, msg_down)
            down_times = [bits_down / r for r in down_rates]
        else:
            budget_down = None
            clamped_down = False
            bits_down = 0
            down_times = [0.0] * m_workers
            server.x_hat = server.x.copy()
            for w in workers:
                w.x_hat = server.x.copy()

        # Worker phase: gradient at the mirror, then budgeted upload.
        up_msgs, u_list = [], []
        budgets_up, bits_up, clamped_up, ks_up, up_rates, up_ests = [], [], [], [], [], []
        for m in range(m_workers):
            if stochastic:
                u = worker_objs[m].stochastic_grad(workers[m].x_hat, [_SEED_BATCH, k])
            else:
                u = worker_objs[m].grad(workers[m].x_hat)
            u_list.append(u)
            start = sim_time + down_times[m] + tm.t_comp_s
            rate = trace_at(up_traces[m], start)
            est = rate if oracle_est else up_est[m].estimate()
            b_up = uplink_budget(est, tm)
            if meta_mode:
                specs_up = [CompressorSpec(IDENTITY) for _ in part.sizes]
                clamped = False
                workers[m].u_hat = u.copy()
                msg = None
                bits = dense_bits
            else:
                delta_u = tensor.sub(u, workers[m].u_hat)
                specs_up, clamped = sel(b_up, delta_u, warm)
                specs_up = with_randk_seeds(specs_up, k, m, _DIR_UP)
                msg = ef21.worker_upload_step(workers[m], u, specs_up,
                                              config.value_bits)
                bits = msg.bit_cost
            up_msgs.append(msg)
            budgets_up.append(b_up)
            bits_up.append(bits)
            clamped_up.append(clamped)
            ks_up.append(tuple(part.sizes[i] if s.kind == IDENTITY else s.k
                               for i, s in enumerate(specs_up)))
            up_rates.append(rate)
            up_ests.append(est)

        # Server phase: fold uploads, step, advance the clock.
        min_ks = tuple(min(ks[i] for ks in ks_up) for i in range(part.num_layers))
        gamma = gamma_policy.gamma(min_ks)
        if meta_mode:
            acc = np.zeros(part.dim)
            for m in range(m_workers):
                server.u_hats[m] = u_list[m].copy()
                acc += weights[m] * u_list[m].values
            server.x = LayeredVector(server.x.values + (-gamma) * acc, part)
        else:
            ef21.server_aggregate_and_step(server, up_msgs, weights, gamma)

        eps_k = compression_error(u_list, [w.u_hat for w in workers])
        round_times = [down_times[m] + tm.t_comp_s + bits_up[m] / up_rates[m]
                       for m in range(m_workers)]
        sim_time += max(round_times)
        overrun = int(any(rt > tm.t_budget_s + _OVERRUN_SLACK for rt in round_times))

        if not oracle_est:
            for m in range(m_workers):
                if bits_up[m] > 0:
                    up_est[m].observe(bits_up[m], bits_up[m] / up_rates[m])
                if downlink_on and bits_down > 0:
                    down_est[m].observe(bits_down, bits_down / down_rates[m])

        rounds_out.append(RoundMetrics(
            round=k,
            sim_time_s=sim_time,
            loss=loss,
            weighted_grad_sq=weighted_grad_sq,
            eps_k=eps_k,
            budget_bits_mean=float(np.mean(budgets_up)),
            bits_up_total=int(sum(bits_up)),
            bits_down_total=int(bits_down) * (m_workers if downlink_on else 0),
            bw_true_mean=float(np.mean(up_rates)),
            bw_est_mean=float(np.mean(up_ests)),
            k_mean=float(np.mean([np.mean(ks) for ks in ks_up])),
            overrun=overrun,
        ))
        details_out.append(RoundDetail(
            budgets_up=tuple(budgets_up),
            budget_down=budget_down,
            bits_up=tuple(bits_up),
            bits_down=bits_down,
            clamped_up=tuple(clamped_up),
            clamped_down=clamped_down,
            round_times=tuple(round_times),
            gamma=gamma,
            ks_up=tuple(ks_up),
        ))
        if log.isEnabledFor(logging.DEBUG):
            log.debug("round %d: loss=%.6g eps=%.4g bits_up=%d gamma=%.4g",
                      k, loss, eps_k, sum(bits_up), gamma)

    final_loss = glob_obj.value(server.x)
    log.info("run done: mode=%s rounds=%d final_loss=%.6g sim_time=%.3fs",
             config.mode, config.rounds, final_loss,
             rounds_out[-1].sim_time_s)
    return RunResult(config, rounds_out, details_out, final_loss,
                     server.x.copy(), t_comp)


def sweep_fixed_k(config: SimConfig, k_values) -> dict:
    """Run the fixed-sparsity mode once per K. Returns {K: RunResult}."""
    out = {}
    for k in k_values:
        cfg = replace(config, mode="ef21", fixed_k=int(k))
        out[int(k)] = run(cfg)
    return out


def best_fixed_k(results: dict) -> int:
    """K with the lowest final loss; ties go to the smaller K."""
    return min(sorted(results), key=lambda k: results[k].final_loss)
