"""Bandwidth-adaptive gradient compression with a deterministic training simulator.

The package has three levels:

* primitives: layered vectors (`tensor`), sparsifying compressors with exact
  bit accounting (`compressors`), bandwidth traces and estimation
  (`bandwidth`), time-budget arithmetic (`budget`), and the knapsack budget
  allocator (`allocator`);
* algorithm state: layer-wise bidirectional error feedback and its step-size
  theory (`ef21`), plus synthetic objectives (`objectives`);
* orchestration: the synchronous parameter-server simulator (`simulator`)
  and the command line front end (`cli`).
"""

__version__ = "0.1.0"

from .tensor import LayerPartition, LayeredVector
from .compressors import CompressorSpec, CompressedMessage
from .budget import TimeModel
from .simulator import SimConfig, RoundMetrics, run

__all__ = [
    "LayerPartition",
    "LayeredVector",
    "CompressorSpec",
    "CompressedMessage",
    "TimeModel",
    "SimConfig",
    "RoundMetrics",
    "run",
]
