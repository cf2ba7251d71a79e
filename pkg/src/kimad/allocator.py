"""Layer-wise budget allocation as a discrete knapsack.

Given the vector a round wants to transmit, each layer gets a small menu of
candidate compressors (retained-entry counts derived from a ratio grid).
Each candidate has an exact bit cost and an exact squared compression
error. The allocator picks one candidate per layer minimizing the total
error subject to the total cost fitting the round's bit budget c.

The dynamic program discretizes the cost axis into D bins of width c / D,
rounding candidate costs up, so any selection the DP accepts also fits the
real budget. Errors stay exact floats. Complexity is O(N * K * D) for N
layers with up to K candidates each; the brute-force enumerator is the
oracle for small instances.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .compressors import CompressorSpec, TOPK, compress, entry_bits
from .tensor import LayeredVector

# Sparsity grid from 1% to 99% in 2% steps, plus the lossless ratio so a
# budget that can pay for everything selects everything.
DEFAULT_RATIO_GRID = tuple(0.01 + 0.02 * j for j in range(50)) + (1.0,)

_BRUTEFORCE_LIMIT = 1_000_000


class AllocationError(ValueError):
    """No full selection fits the budget, or the problem is malformed."""


@dataclass
class AllocationProblem:
    """Per-layer candidate menus plus the budget and DP discretization.

    ks[i][j], costs[i][j], errors[i][j] describe candidate j of layer i.
    Costs are exact bits; the DP bins them on demand.
    """

    ks: list
    costs: list
    errors: list
    budget_bits: float
    discretization: int = 1000

    def __post_init__(self):
        if self.budget_bits <= 0:
            raise AllocationError(f"budget must be positive, got {self.budget_bits}")
        if self.discretization < 1:
            raise AllocationError(f"discretization must be >= 1, got {self.discretization}")
        if not self.costs or any(len(c) == 0 for c in self.costs):
            raise AllocationError("every layer needs at least one candidate")
        for i, (cs, es) in enumerate(zip(self.costs, self.errors)):
            if len(cs) != len(es):
                raise AllocationError(f"layer {i}: cost/error tables differ in length")
            if any(c <= 0 for c in cs):
                raise AllocationError(f"layer {i}: candidate costs must be positive")
            if any(e < 0 or not math.isfinite(e) for e in es):
                raise AllocationError(f"layer {i}: candidate errors must be finite and >= 0")

    @property
    def num_layers(self) -> int:
        return len(self.costs)


@dataclass
class Allocation:
    """Chosen candidate index per layer and the exact totals."""

    choices: tuple
    total_error: float
    total_cost_bits: float
    dp_cells: int = field(default=0, compare=False)


def layer_error(u_layer: np.ndarray, spec: CompressorSpec, value_bits: int = 32) -> float:
    """Exact squared error of compressing one layer with one candidate."""
    u_layer = np.asarray(u_layer, dtype=np.float64)
    (idx, vals), _ = compress(spec, u_layer, value_bits)
    dense = np.zeros(u_layer.size)
    dense[idx] = vals
    diff = dense - u_layer
    return float(np.dot(diff, diff))


def candidate_ks(layer_dim: int, ratio_grid) -> list:
    """Retained-entry counts for one layer: max(1, round(ratio * dim)), deduped."""
    ks = []
    for r in ratio_grid:
        if not 0 < r <= 1:
            raise AllocationError(f"ratios must lie in (0, 1], got {r}")
        k = max(1, round(r * layer_dim))
        if k not in ks:
            ks.append(k)
    return sorted(ks)


def build_tables(u: LayeredVector, ratio_grid, budget_bits: float,
                 discretization: int = 1000, value_bits: int = 32,
                 family: str = TOPK, extra_ks=None) -> AllocationProblem:
    """Candidate cost/error tables for allocating budget_bits over u's layers.

    extra_ks, when given, lists one additional retained-entry count per
    layer to merge into that layer's menu. The proportional split goes in
    this way, so the DP's optimum can never fall behind it.
    """
    part = u.partition
    ks, costs, errors = [], [], []
    for i in range(part.num_layers):
        dim = part.sizes[i]
        layer = u.values[part.span(i)]
        per_entry = entry_bits(dim, value_bits)
        layer_ks = candidate_ks(dim, ratio_grid)
        if extra_ks is not None:
            extra = int(extra_ks[i])
            if not 1 <= extra <= dim:
                raise AllocationError(
                    f"layer {i}: extra candidate {extra} outside [1, {dim}]")
            if extra not in layer_ks:
                layer_ks = sorted(layer_ks + [extra])
        ks.append(layer_ks)
        costs.append([k * per_entry for k in layer_ks])
        errors.append([layer_error(layer, CompressorSpec(family, k), value_bits)
                       for k in layer_ks])
    return AllocationProblem(ks, costs, errors, budget_bits, discretization)


def _binned_costs(problem: AllocationProblem):
    """Candidate costs rounded up to bins of width budget / D."""
    width = problem.budget_bits / problem.discretization
    return [[math.ceil(c / width) for c in layer] for layer in problem.costs]


def allocate_dp(problem: AllocationProblem) -> Allocation:
    """Minimum-error selection by dynamic programming over cost bins.

    dp[b] after layer i is the least total error of layers 0..i whose
    binned cost is at most b. Rounding costs up keeps every accepted
    selection inside the true budget; the reconstruction re-checks the
    exact cost anyway and falls back to tighter bins if needed.
    """
    D = problem.discretization
    binned = _binned_costs(problem)
    n = problem.num_layers

    dp = np.zeros(D + 1)
    choice_rows = []
    dp_cells = 0
    for i in range(n):
        cands = binned[i]
        dp_cells += len(cands) * (D + 1)
        table = np.full((len(cands), D + 1), np.inf)
        for j, dc in enumerate(cands):
            if dc <= D:
                table[j, dc:] = dp[: D + 1 - dc] + problem.errors[i][j]
        dp = table.min(axis=0)
        choice_rows.append(table.argmin(axis=0))
    if not np.isfinite(dp[D]):
        raise AllocationError("no full selection fits the budget")

    for top in range(D, -1, -1):
        if not np.isfinite(dp[top]):
            break
        choices = []
        b = top
        for i in range(n - 1, -1, -1):
            j = int(choice_rows[i][b])
            choices.append(j)
            b -= binned[i][j]
        choices.reverse()
        total_cost = sum(problem.costs[i][j] for i, j in enumerate(choices))
        if total_cost <= problem.budget_bits:
            total_error = sum(problem.errors[i][j] for i, j in enumerate(choices))
            return Allocation(tuple(choices), total_error, total_cost, dp_cells)
    raise AllocationError("no reconstructed selection fits the budget")


def allocate_bruteforce(problem: AllocationProblem) -> Allocation:
    """Exhaustive oracle: exact minimum over all candidate combinations.

    Ties break toward lower total cost, then lexicographically smaller
    choice indices. Guarded to a million combinations.
    """
    sizes = [len(c) for c in problem.costs]
    combos = 1
    for s in sizes:
        combos *= s
    if combos > _BRUTEFORCE_LIMIT:
        raise AllocationError(f"{combos} combinations exceed the brute-force guard")
    best = None
    for choices in itertools.product(*(range(s) for s in sizes)):
        cost = sum(problem.costs[i][j] for i, j in enumerate(choices))
        if cost > problem.budget_bits:
            continue
        err = sum(problem.errors[i][j] for i, j in enumerate(choices))
        key = (err, cost, choices)
        if best is None or key < best:
            best = key
    if best is None:
        raise AllocationError("no full selection fits the budget")
    err, cost, choices = best
    return Allocation(tuple(choices), err, cost)
