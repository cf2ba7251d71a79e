"""Sparsifying compressors with exact bit accounting.

A compressor turns a dense layer into a sparse payload of (index, value)
pairs. Bit costs are counted explicitly: each retained entry pays its value
bits plus ceil(log2(layer_dim)) index bits, so a budget in bits maps back to
a retained-entry count k. TopK keeps the largest-magnitude entries and is
deterministic; RandK keeps a seeded uniform sample, rescaled by dim/k so it
is unbiased; Identity keeps everything and pays dense cost (no index bits).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import LayeredVector, LayerPartition

TOPK = "topk"
RANDK = "randk"
IDENTITY = "identity"

_KINDS = (TOPK, RANDK, IDENTITY)


@dataclass(frozen=True)
class CompressorSpec:
    """One layer's compressor: kind, retained entries k, and RandK stream id."""

    kind: str
    k: int = 0
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown compressor kind {self.kind!r}")
        if self.kind != IDENTITY and self.k < 1:
            raise ValueError(f"{self.kind} needs k >= 1, got {self.k}")


@dataclass
class CompressedMessage:
    """Per-layer sparse payloads plus the total wire cost in bits."""

    layers: list
    bit_cost: int
    partition: LayerPartition


def index_bits(dim: int) -> int:
    """Bits to address one of dim entries: ceil(log2 dim), 0 for dim == 1."""
    if dim < 1:
        raise ValueError(f"dim must be positive, got {dim}")
    return (dim - 1).bit_length()


def entry_bits(dim: int, value_bits: int = 32) -> int:
    """Wire cost of one retained (index, value) pair in a layer of size dim."""
    return value_bits + index_bits(dim)


def compress(spec: CompressorSpec, v: np.ndarray, value_bits: int = 32):
    """Apply one compressor to a dense layer.

    Returns ((indices, values), bit_cost). Indices are strictly increasing.
    """
    v = np.asarray(v, dtype=np.float64)
    dim = v.size
    if dim < 1:
        raise ValueError("cannot compress an empty layer")
    if spec.kind == IDENTITY:
        return (np.arange(dim), v.copy()), dim * value_bits
    if spec.k > dim:
        raise ValueError(f"k={spec.k} exceeds layer dim {dim}")
    if spec.kind == TOPK:
        # Largest magnitudes; ties broken toward the lowest index.
        order = np.lexsort((np.arange(dim), -np.abs(v)))
        idx = np.sort(order[: spec.k])
        vals = v[idx]
    else:  # RANDK
        rng = np.random.default_rng(spec.seed if spec.seed is not None else 0)
        idx = np.sort(rng.choice(dim, size=spec.k, replace=False))
        vals = v[idx] * (dim / spec.k)
    return (idx, vals), spec.k * entry_bits(dim, value_bits)


def compress_vector(specs, v: LayeredVector, value_bits: int = 32) -> CompressedMessage:
    """Compress every layer of v with its own spec."""
    part = v.partition
    if len(specs) != part.num_layers:
        raise ValueError(f"{len(specs)} specs for {part.num_layers} layers")
    layers = []
    total = 0
    for i, spec in enumerate(specs):
        payload, bits = compress(spec, v.values[part.span(i)], value_bits)
        layers.append(payload)
        total += bits
    return CompressedMessage(layers, total, part)


def decompress(msg: CompressedMessage, partition: LayerPartition) -> LayeredVector:
    """Expand a message back to a dense layered vector (zeros elsewhere)."""
    if msg.partition.offsets != partition.offsets:
        raise ValueError("message partition does not match the target partition")
    out = np.zeros(partition.dim)
    for i, (idx, vals) in enumerate(msg.layers):
        out[partition.span(i)][idx] = vals
    return LayeredVector(out, partition)


def k_for_budget(budget_bits: float, layer_dim: int, value_bits: int = 32) -> int:
    """Largest k whose sparse cost fits the budget, clamped to [1, layer_dim].

    The lower clamp guarantees minimum progress: one entry is always sent
    even when the budget cannot pay for it.
    """
    if layer_dim < 1:
        raise ValueError(f"layer_dim must be positive, got {layer_dim}")
    per_entry = entry_bits(layer_dim, value_bits)
    k = int(budget_bits // per_entry) if budget_bits > 0 else 0
    return max(1, min(layer_dim, k))


def contraction_alpha(spec: CompressorSpec, dim: int) -> float:
    """Contraction coefficient of the compressor on layers of size dim.

    For the rescaled RandK this describes the plain k-sparse selection, with
    the dim/k factor removed.
    """
    if spec.kind == IDENTITY:
        return 1.0
    if spec.k > dim:
        raise ValueError(f"k={spec.k} exceeds layer dim {dim}")
    return spec.k / dim
