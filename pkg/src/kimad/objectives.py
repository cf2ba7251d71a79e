"""Synthetic training objectives with exact layer-wise smoothness constants.

The diagonal quadratic f(x) = 0.5 * sum_j a_j x_j^2 is the workhorse for
step-size theory checks: gradients, layer smoothness constants and the
optimum are all known in closed form. The layered least-squares model adds
realistic structure (many layers, heterogeneous scales, mini-batch
stochastic gradients) while staying cheap and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import LayerPartition, LayeredVector


@dataclass(frozen=True)
class QuadraticObjective:
    """f(x) = 0.5 * sum_j a_j x_j^2 with a_j > 0."""

    a: np.ndarray
    partition: LayerPartition

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        object.__setattr__(self, "a", a)
        if a.size != self.partition.dim or np.any(a <= 0) or not np.isfinite(a).all():
            raise ValueError("curvatures must be positive, finite and match the partition")

    @classmethod
    def random(cls, partition: LayerPartition, seed: int, a_min: float = 1.0,
               a_max: float = 100.0) -> "QuadraticObjective":
        """Curvatures log-uniform in [a_min, a_max]."""
        rng = np.random.default_rng(seed)
        a = np.exp(rng.uniform(np.log(a_min), np.log(a_max), size=partition.dim))
        return cls(a, partition)

    def value(self, x: LayeredVector) -> float:
        return 0.5 * float(np.dot(self.a * x.values, x.values))

    def grad(self, x: LayeredVector) -> LayeredVector:
        return LayeredVector(self.a * x.values, self.partition)

    def smoothness_constants(self):
        """(per-layer L_i, global L); exact for a diagonal Hessian."""
        part = self.partition
        l_layers = np.array([self.a[part.span(i)].max() for i in range(part.num_layers)])
        return l_layers, float(self.a.max())

    @property
    def f_inf(self) -> float:
        return 0.0


class LayeredLsqObjective:
    """Layer-separable least squares, f(x) = sum_i ||A_i x_i - y_i||^2 / (2n).

    Each layer has its own n x d_i design matrix; sampling a mini-batch
    picks the same rows in every layer, so a batch gradient is the exact
    gradient of the batch's least-squares problem.
    """

    def __init__(self, design, targets, partition: LayerPartition,
                 batch_size: int, data_seed: int = 0):
        self.design = [np.asarray(A, dtype=np.float64) for A in design]
        self.targets = [np.asarray(y, dtype=np.float64) for y in targets]
        self.partition = partition
        self.batch_size = int(batch_size)
        self.data_seed = int(data_seed)
        if len(self.design) != partition.num_layers:
            raise ValueError("one design matrix per layer required")
        n = self.design[0].shape[0]
        for i, (A, y) in enumerate(zip(self.design, self.targets)):
            if A.shape != (n, partition.sizes[i]) or y.shape != (n,):
                raise ValueError(f"layer {i}: design/target shapes inconsistent")
        if not 1 <= self.batch_size <= n:
            raise ValueError(f"batch size must lie in [1, {n}], got {batch_size}")
        self.num_samples = n

    @classmethod
    def random(cls, layer_sizes, num_samples: int, batch_size: int, seed: int,
               scale_min: float = 0.3, scale_max: float = 3.0,
               target_noise: float = 0.1) -> "LayeredLsqObjective":
        """Gaussian designs with log-spaced per-layer scales and planted targets."""
        partition = LayerPartition.from_sizes(layer_sizes)
        rng = np.random.default_rng(seed)
        scales = np.exp(np.linspace(np.log(scale_min), np.log(scale_max),
                                    partition.num_layers))
        design, targets = [], []
        for i, d_i in enumerate(partition.sizes):
            A = scales[i] * rng.standard_normal((num_samples, d_i)) / np.sqrt(d_i)
            x_star = rng.standard_normal(d_i)
            y = A @ x_star + target_noise * rng.standard_normal(num_samples)
            design.append(A)
            targets.append(y)
        return cls(design, targets, partition, batch_size, data_seed=seed)

    def value(self, x: LayeredVector) -> float:
        n = self.num_samples
        total = 0.0
        for i in range(self.partition.num_layers):
            r = self.design[i] @ x.values[self.partition.span(i)] - self.targets[i]
            total += float(np.dot(r, r)) / (2 * n)
        return total

    def grad(self, x: LayeredVector) -> LayeredVector:
        return self.batch_grad(x, np.arange(self.num_samples))

    def batch_grad(self, x: LayeredVector, rows) -> LayeredVector:
        rows = np.asarray(rows)
        out = np.zeros(self.partition.dim)
        for i in range(self.partition.num_layers):
            A = self.design[i][rows]
            r = A @ x.values[self.partition.span(i)] - self.targets[i][rows]
            out[self.partition.span(i)] = A.T @ r / rows.size
        return LayeredVector(out, self.partition)

    def disjoint_batches(self, round_seed) -> list:
        """Seeded permutation of the samples cut into batch_size chunks."""
        rng = np.random.default_rng([self.data_seed, *np.atleast_1d(round_seed)])
        perm = rng.permutation(self.num_samples)
        b = self.batch_size
        return [perm[s:s + b] for s in range(0, self.num_samples, b)]

    def stochastic_grad(self, x: LayeredVector, round_seed) -> LayeredVector:
        """Mini-batch gradient, deterministic given (data_seed, round_seed)."""
        return self.batch_grad(x, self.disjoint_batches(round_seed)[0])

    def smoothness_constants(self):
        """(per-layer L_i, global L) from the largest normal-matrix eigenvalues."""
        n = self.num_samples
        l_layers = []
        for A in self.design:
            normal = A.T @ A / n
            l_layers.append(float(np.linalg.eigvalsh(normal)[-1]))
        l_layers = np.array(l_layers)
        return l_layers, float(l_layers.max())

    def split(self, num_workers: int) -> list:
        """Disjoint equal row shards; with uniform weights they average to f."""
        n = self.num_samples
        if n % num_workers != 0:
            raise ValueError(f"{n} samples do not split into {num_workers} equal shards")
        shard = n // num_workers
        out = []
        for m in range(num_workers):
            rows = slice(m * shard, (m + 1) * shard)
            out.append(LayeredLsqObjective(
                [A[rows] for A in self.design],
                [y[rows] for y in self.targets],
                self.partition,
                min(self.batch_size, shard),
                data_seed=self.data_seed * 1000 + m,
            ))
        return out
