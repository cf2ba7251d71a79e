"""Flat model vectors split into contiguous layers.

Everything downstream is layer-wise: compressors are applied per layer,
budgets are allocated per layer, and the error-feedback recursion keeps
per-layer estimators. A LayerPartition records the boundaries once and a
LayeredVector pairs it with a float64 value array.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LayerPartition:
    """Layer boundaries: layer i spans offsets[i]..offsets[i+1] of the flat vector."""

    offsets: tuple[int, ...]

    def __post_init__(self):
        offs = tuple(int(o) for o in self.offsets)
        object.__setattr__(self, "offsets", offs)
        if len(offs) < 2 or offs[0] != 0:
            raise ValueError(f"offsets must start at 0 and delimit at least one layer: {offs}")
        if any(b <= a for a, b in zip(offs, offs[1:])):
            raise ValueError(f"offsets must be strictly increasing: {offs}")

    @classmethod
    def from_sizes(cls, sizes) -> "LayerPartition":
        offs = [0]
        for s in sizes:
            offs.append(offs[-1] + int(s))
        return cls(tuple(offs))

    @classmethod
    def equal_split(cls, dim: int, num_layers: int) -> "LayerPartition":
        if dim % num_layers != 0:
            raise ValueError(f"dim {dim} not divisible into {num_layers} equal layers")
        return cls.from_sizes([dim // num_layers] * num_layers)

    @property
    def dim(self) -> int:
        return self.offsets[-1]

    @property
    def num_layers(self) -> int:
        return len(self.offsets) - 1

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(b - a for a, b in zip(self.offsets, self.offsets[1:]))

    def span(self, i: int) -> slice:
        if not 0 <= i < self.num_layers:
            raise IndexError(f"layer {i} out of range for {self.num_layers} layers")
        return slice(self.offsets[i], self.offsets[i + 1])


@dataclass
class LayeredVector:
    """A float64 vector together with its layer partition."""

    values: np.ndarray
    partition: LayerPartition

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1 or self.values.size != self.partition.dim:
            raise ValueError(
                f"value shape {self.values.shape} does not match partition dim {self.partition.dim}"
            )
        if not np.isfinite(self.values).all():
            raise ValueError("non-finite entries in layered vector")

    def layer(self, i: int) -> np.ndarray:
        return self.values[self.partition.span(i)].copy()

    def copy(self) -> "LayeredVector":
        return LayeredVector(self.values.copy(), self.partition)


def zeros(partition: LayerPartition) -> LayeredVector:
    return LayeredVector(np.zeros(partition.dim), partition)


def layer_slice(v: LayeredVector, i: int) -> np.ndarray:
    """Copy of layer i of v."""
    return v.layer(i)


def _check_same_partition(u: LayeredVector, v: LayeredVector):
    if u.partition.offsets != v.partition.offsets:
        raise ValueError(
            f"partition mismatch: {u.partition.offsets} vs {v.partition.offsets}"
        )


def add(u: LayeredVector, v: LayeredVector) -> LayeredVector:
    _check_same_partition(u, v)
    return LayeredVector(u.values + v.values, u.partition)


def sub(u: LayeredVector, v: LayeredVector) -> LayeredVector:
    _check_same_partition(u, v)
    return LayeredVector(u.values - v.values, u.partition)


def scale(c: float, v: LayeredVector) -> LayeredVector:
    return LayeredVector(c * v.values, v.partition)


def axpy(a: float, x: LayeredVector, y: LayeredVector) -> LayeredVector:
    """a*x + y."""
    _check_same_partition(x, y)
    return LayeredVector(a * x.values + y.values, x.partition)


def sq_norm(v: LayeredVector) -> float:
    # Accumulated layer by layer so the layer decomposition identity holds
    # exactly in floating point, not just up to regrouping error.
    return sum(layer_sq_norm(v, i) for i in range(v.partition.num_layers))


def layer_sq_norm(v: LayeredVector, i: int) -> float:
    x = v.values[v.partition.span(i)]
    return float(np.dot(x, x))
