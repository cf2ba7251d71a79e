"""Layer-wise bidirectional error feedback and its step-size theory.

Both endpoints of every link keep a compressed estimate of what the other
side wants: the server maintains x_hat (what workers believe the model is)
and u_hat_m per worker (what it believes worker m's gradient is); each
worker mirrors x_hat and its own u_hat. Every message carries a compressed
difference, and both sides fold it in with the same floating-point
operations, so the mirrored states stay bit-identical without ever sending
dense vectors.

The theory half computes, for per-layer contraction coefficients alpha_i,
the recursion constants theta_i and beta_i, the largest admissible step
size, and the stationarity bound that a run of the plain (uplink-only)
recursion must satisfy. run_recursion executes that recursion while
checking the per-step contraction and descent inequalities it relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import tensor
from .compressors import IDENTITY, CompressedMessage, compress_vector, decompress
from .tensor import LayeredVector, LayerPartition


@dataclass
class Ef21WorkerState:
    """Worker m's mirrors of the model estimate and its gradient estimate."""

    x_hat: LayeredVector
    u_hat: LayeredVector


@dataclass
class Ef21ServerState:
    """Server-side model, broadcast estimate, and per-worker gradient estimates."""

    x: LayeredVector
    x_hat: LayeredVector
    u_hats: list


def init_states(x0: LayeredVector, num_workers: int):
    """Fresh server and worker states: x_hat starts at x0, u_hat at zero."""
    part = x0.partition
    server = Ef21ServerState(
        x=x0.copy(),
        x_hat=x0.copy(),
        u_hats=[tensor.zeros(part) for _ in range(num_workers)],
    )
    workers = [Ef21WorkerState(x_hat=x0.copy(), u_hat=tensor.zeros(part))
               for _ in range(num_workers)]
    return server, workers


def server_broadcast_step(server: Ef21ServerState, specs,
                          value_bits: int = 32) -> CompressedMessage:
    """Compress x - x_hat, fold it into the server's x_hat, return the message."""
    delta = tensor.sub(server.x, server.x_hat)
    msg = compress_vector(specs, delta, value_bits)
    server.x_hat = tensor.add(server.x_hat, decompress(msg, delta.partition))
    return msg


def worker_receive(worker: Ef21WorkerState, msg: CompressedMessage):
    """Apply a broadcast message; mirrors the server's x_hat update exactly."""
    worker.x_hat = tensor.add(worker.x_hat, decompress(msg, worker.x_hat.partition))


def worker_upload_step(worker: Ef21WorkerState, u: LayeredVector, specs,
                       value_bits: int = 32) -> CompressedMessage:
    """Compress u - u_hat, fold it into the worker's u_hat, return the message."""
    delta = tensor.sub(u, worker.u_hat)
    msg = compress_vector(specs, delta, value_bits)
    worker.u_hat = tensor.add(worker.u_hat, decompress(msg, u.partition))
    return msg


def server_aggregate_and_step(server: Ef21ServerState, messages, weights,
                              gamma: float):
    """Fold worker messages into the u_hat mirrors and take the model step.

    Aggregation order is fixed by worker id so runs are reproducible.
    """
    if len(messages) != len(server.u_hats):
        raise ValueError(f"expected {len(server.u_hats)} messages, got {len(messages)}")
    part = server.x.partition
    for m, msg in enumerate(messages):
        if msg is None:
            raise ValueError(f"missing upload message for worker {m}")
        server.u_hats[m] = tensor.add(server.u_hats[m], decompress(msg, part))
    acc = np.zeros(part.dim)
    for m, w in enumerate(weights):
        acc += w * server.u_hats[m].values
    server.x = LayeredVector(server.x.values + (-gamma) * acc, part)


def layerwise_gd_step(x: LayeredVector, u_hat: LayeredVector, gammas) -> LayeredVector:
    """x_i <- x_i - gamma_i * u_hat_i with a per-layer step size."""
    part = x.partition
    if len(gammas) != part.num_layers:
        raise ValueError(f"{len(gammas)} step sizes for {part.num_layers} layers")
    out = x.values.copy()
    for i, g in enumerate(gammas):
        sl = part.span(i)
        out[sl] = out[sl] + (-g) * u_hat.values[sl]
    return LayeredVector(out, part)


# ---------------------------------------------------------------------------
# Step-size theory.


def default_zeta(alpha: float) -> float:
    """Free parameter choice 1/sqrt(1 - alpha) - 1, maximizing theta's margin."""
    if not 0 < alpha < 1:
        raise ValueError(f"default zeta needs alpha in (0, 1), got {alpha}")
    return 1.0 / math.sqrt(1.0 - alpha) - 1.0


def theta_beta(alpha: float, zeta: float):
    """Contraction-recursion constants (theta, beta) for one layer."""
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if alpha == 1.0:
        return 1.0, 0.0
    if zeta <= 0:
        raise ValueError(f"zeta must be positive, got {zeta}")
    theta = 1.0 - (1.0 - alpha) * (1.0 + zeta)
    beta = (1.0 - alpha) * (1.0 + 1.0 / zeta)
    if theta <= 0:
        raise ValueError(f"zeta={zeta} too large for alpha={alpha}: theta={theta} <= 0")
    return theta, beta


@dataclass
class TheoryParams:
    """Per-layer constants feeding the step-size and stationarity bounds."""

    alphas: np.ndarray
    zetas: np.ndarray
    thetas: np.ndarray
    betas: np.ndarray
    deltas: np.ndarray
    weights: np.ndarray
    l_layers: np.ndarray
    l_global: float

    @classmethod
    def from_alphas(cls, alphas, l_layers, l_global, deltas=None, weights=None,
                    zetas=None) -> "TheoryParams":
        alphas = np.asarray(alphas, dtype=np.float64)
        n = alphas.size
        l_layers = np.asarray(l_layers, dtype=np.float64)
        deltas = np.ones(n) if deltas is None else np.asarray(deltas, dtype=np.float64)
        weights = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
        if np.any(deltas <= 0) or np.any(weights <= 0):
            raise ValueError("layer deltas and weights must be positive")
        if zetas is None:
            zetas = np.array([default_zeta(a) if a < 1 else 1.0 for a in alphas])
        else:
            zetas = np.asarray(zetas, dtype=np.float64)
        pairs = [theta_beta(a, z) for a, z in zip(alphas, zetas)]
        thetas = np.array([p[0] for p in pairs])
        betas = np.array([p[1] for p in pairs])
        return cls(alphas, zetas, thetas, betas, deltas, weights, l_layers,
                   float(l_global))

    @property
    def theta(self) -> float:
        return float(self.thetas.min())


def max_stepsize(params: TheoryParams) -> float:
    """Largest gamma satisfying every layer's admissibility inequality.

    Layer i requires
        gamma^2 * w_i * max_j(w_j / delta_j) * max_j(delta_j beta_j) * L^2 / theta
        + gamma * L_i * w_i <= 1,
    so gamma is the smallest positive quadratic root across layers. With all
    beta_j = 0 (no compression) this degenerates to min_i 1 / (L_i w_i).
    """
    theta = params.theta
    w_over_delta = float((params.weights / params.deltas).max())
    delta_beta = float((params.deltas * params.betas).max())
    gammas = []
    for i in range(params.alphas.size):
        a_coef = params.weights[i] * w_over_delta * delta_beta * params.l_global ** 2 / theta
        b_coef = params.l_layers[i] * params.weights[i]
        if a_coef > 0:
            g = (-b_coef + math.sqrt(b_coef ** 2 + 4.0 * a_coef)) / (2.0 * a_coef)
        else:
            g = 1.0 / b_coef
        gammas.append(g)
    return min(gammas)


def gap_metric(u_hat: LayeredVector, grad: LayeredVector, deltas) -> float:
    """Weighted estimator gap G = sum_i delta_i * ||u_hat_i - grad_i||^2."""
    part = u_hat.partition
    diff = tensor.sub(u_hat, grad)
    return sum(float(deltas[i]) * tensor.layer_sq_norm(diff, i)
               for i in range(part.num_layers))


def theorem_bound(f0: float, f_inf: float, gamma: float, rounds: int,
                  params: TheoryParams, layer_gaps0) -> float:
    """Upper bound on the average weighted squared gradient norm over a run.

        2 (f(x0) - f_inf) / (gamma K)
        + max_i(w_i / delta_i) * sum_i delta_i ||u_hat0_i - grad0_i||^2 / (theta K)
    """
    if rounds < 1 or gamma <= 0:
        raise ValueError("need rounds >= 1 and gamma > 0")
    layer_gaps0 = np.asarray(layer_gaps0, dtype=np.float64)
    w_over_delta = float((params.weights / params.deltas).max())
    gap0 = float(np.dot(params.deltas, layer_gaps0))
    return (2.0 * (f0 - f_inf) / (gamma * rounds)
            + w_over_delta * gap0 / (params.theta * rounds))


# ---------------------------------------------------------------------------
# Reference recursion with per-step inequality checks.


@dataclass
class RecursionTrace:
    """Outcome of a recursion run plus the worst per-step inequality margins."""

    losses: np.ndarray
    mean_weighted_grad_sq: float
    bound: float
    max_contraction_violation: float
    max_descent_violation: float
    gamma: float
    layer_gaps0: np.ndarray = field(repr=False, default=None)


def _rel_violation(lhs: float, rhs: float, floor: float = 0.0) -> float:
    """Signed violation of lhs <= rhs, relative to the larger side.

    floor carries the squared magnitude of the vectors behind the two
    sides. Without it, a bound that is exactly zero (theta = 1, beta = 0
    on a full-k layer) measured against last-ulp residue in lhs would
    read as a total violation instead of rounding noise.
    """
    scale = max(abs(lhs), abs(rhs), floor)
    if scale == 0.0:
        return 0.0
    return (lhs - rhs) / scale


def run_recursion(objective, specs, rounds: int, gamma: float | None = None,
                  params: TheoryParams | None = None, x0: LayeredVector = None,
                  u_hat0: LayeredVector = None, value_bits: int = 32) -> RecursionTrace:
    """Run the layer-wise single-sequence recursion and audit it step by step.

    The model update is x_i <- x_i - gamma * w_i * u_hat_i and the estimator
    update is u_hat_i <- u_hat_i + C_i(grad_i(x_new) - u_hat_i). At every
    step the per-layer contraction inequality

        ||u_hat_new_i - g_new_i||^2
            <= (1 - theta_i) ||u_hat_i - g_i||^2 + beta_i ||g_new_i - g_i||^2

    and the smoothness descent inequality

        f(x_new) <= f(x) - sum_i (gamma_i / 2) ||g_i||^2
                   - sum_i (1 / (2 gamma_i) - L_i / 2) ||x_new_i - x_i||^2
                   + sum_i (gamma_i / 2) ||u_hat_i - g_i||^2

    are evaluated; the worst relative violations are reported.
    """
    part = objective.partition
    n = part.num_layers
    if params is None:
        l_layers, l_global = objective.smoothness_constants()
        alphas = [spec.k / part.sizes[i] if spec.kind != IDENTITY else 1.0
                  for i, spec in enumerate(specs)]
        params = TheoryParams.from_alphas(alphas, l_layers, l_global)
    if gamma is None:
        gamma = max_stepsize(params)
    gammas = gamma * params.weights

    x = x0.copy() if x0 is not None else tensor.zeros(part)
    u_hat = u_hat0.copy() if u_hat0 is not None else tensor.zeros(part)
    spans = [part.span(i) for i in range(n)]

    g = objective.grad(x)
    layer_gaps0 = np.array([tensor.layer_sq_norm(tensor.sub(u_hat, g), i)
                            for i in range(n)])
    f_val = objective.value(x)

    losses = np.empty(rounds + 1)
    lhs_acc = 0.0
    worst_contraction = -np.inf
    worst_descent = -np.inf

    for k in range(rounds):
        losses[k] = f_val
        gv, uv = g.values, u_hat.values
        grad_sq = np.array([float(np.dot(gv[s], gv[s])) for s in spans])
        gap_sq = np.array([float(np.dot(uv[s] - gv[s], uv[s] - gv[s])) for s in spans])
        lhs_acc += float(np.dot(params.weights, grad_sq))

        x_new = np.empty(part.dim)
        for i, s in enumerate(spans):
            x_new[s] = x.values[s] + (-gammas[i]) * uv[s]
        x_new = LayeredVector(x_new, part)
        f_new = objective.value(x_new)
        g_new = objective.grad(x_new)

        step_sq = np.array([float(np.dot(x_new.values[s] - x.values[s],
                                         x_new.values[s] - x.values[s]))
                            for s in spans])
        descent_rhs = f_val - float(
            np.dot(gammas / 2.0, grad_sq)
            + np.dot(1.0 / (2.0 * gammas) - params.l_layers / 2.0, step_sq)
            - np.dot(gammas / 2.0, gap_sq))
        worst_descent = max(worst_descent, _rel_violation(f_new, descent_rhs))

        delta = tensor.sub(g_new, u_hat)
        msg = compress_vector(specs, delta, value_bits)
        u_hat = tensor.add(u_hat, decompress(msg, part))

        gnv, unv = g_new.values, u_hat.values
        for i, s in enumerate(spans):
            new_gap = float(np.dot(unv[s] - gnv[s], unv[s] - gnv[s]))
            drift = float(np.dot(gnv[s] - gv[s], gnv[s] - gv[s]))
            rhs = (1.0 - params.thetas[i]) * gap_sq[i] + params.betas[i] * drift
            mag = max(float(np.dot(gnv[s], gnv[s])), float(np.dot(uv[s], uv[s])))
            worst_contraction = max(worst_contraction,
                                    _rel_violation(new_gap, rhs, mag))

        x, g, f_val = x_new, g_new, f_new

    losses[rounds] = f_val
    f_inf = getattr(objective, "f_inf", 0.0)
    bound = theorem_bound(losses[0], f_inf, gamma, rounds, params, layer_gaps0)
    return RecursionTrace(
        losses=losses,
        mean_weighted_grad_sq=lhs_acc / rounds,
        bound=bound,
        max_contraction_violation=worst_contraction,
        max_descent_violation=worst_descent,
        gamma=gamma,
        layer_gaps0=layer_gaps0,
    )
