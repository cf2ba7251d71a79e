"""Bandwidth traces and link-rate estimation.

A trace maps simulation time to an instantaneous link rate in bits/second.
Synthetic patterns (sinusoidal with optional clamped noise, two-level
square wave, constant) cover the simulator scenarios; measured traces come
from text files of "time_seconds,bits_per_second" samples, optionally
prefixed with a worker id column, and are linearly interpolated.

Endpoints do not see traces directly. They keep an exponentially weighted
moving average over the throughput of their own completed transfers,
warm-started from a configured prior before the first observation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Hard floor so a noisy trace can never report a non-positive rate.
_MIN_RATE = 1e-9


class TraceFileError(ValueError):
    """A trace file could not be parsed or violates the sample contract."""


@dataclass(frozen=True)
class SinusoidalTrace:
    """eta * sin(theta * t)^2 + delta, plus optional clamped Gaussian noise.

    Noise is drawn deterministically per (seed, t), truncated to three
    standard deviations, and the result is floored to stay positive.
    """

    eta: float
    theta: float
    delta: float
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.delta <= 0 or self.eta < 0 or self.noise_std < 0:
            raise ValueError("sinusoidal trace needs delta > 0, eta >= 0, noise_std >= 0")

    def at(self, t: float) -> float:
        base = self.eta * np.sin(self.theta * t) ** 2 + self.delta
        if self.noise_std > 0:
            bits = int(np.float64(t).view(np.int64))
            rng = np.random.default_rng([self.seed, bits])
            noise = rng.normal(0.0, self.noise_std)
            lim = 3.0 * self.noise_std
            base += min(max(noise, -lim), lim)
        return max(float(base), _MIN_RATE)


@dataclass(frozen=True)
class TwoLevelTrace:
    """Square wave alternating between low and high every period seconds."""

    low: float
    high: float
    period: float

    def __post_init__(self):
        if self.low <= 0 or self.high <= 0 or self.period <= 0:
            raise ValueError("two-level trace needs positive low, high, period")

    def at(self, t: float) -> float:
        return self.low if int(t // self.period) % 2 == 0 else self.high


@dataclass(frozen=True)
class ConstantTrace:
    rate: float

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError("constant trace needs a positive rate")

    def at(self, t: float) -> float:
        return self.rate


class FileTrace:
    """Linear interpolation over samples; holds the edge values outside them."""

    def __init__(self, times, rates, worker_id: int | None = None):
        self.times = np.asarray(times, dtype=np.float64)
        self.rates = np.asarray(rates, dtype=np.float64)
        self.worker_id = worker_id
        if self.times.size == 0:
            raise TraceFileError("trace has no samples")
        if np.any(np.diff(self.times) <= 0):
            raise TraceFileError("trace timestamps must be strictly increasing")
        if np.any(self.rates <= 0):
            raise TraceFileError("trace rates must be positive")

    def at(self, t: float) -> float:
        return float(np.interp(t, self.times, self.rates))


def trace_at(trace, t: float) -> float:
    """Instantaneous rate of any trace at time t >= 0."""
    if t < 0:
        raise ValueError(f"time must be non-negative, got {t}")
    return trace.at(t)


def ingest_trace_file(path, worker_id: int | None = None) -> FileTrace:
    """Load one worker's trace from a sample file.

    Lines are "time_seconds,bits_per_second" or
    "worker_id,time_seconds,bits_per_second"; '#' lines are comments. With
    three-column files a worker_id must be given to pick the link.
    """
    rows = []
    has_worker_col = False
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            try:
                if len(parts) == 2:
                    rows.append((None, float(parts[0]), float(parts[1])))
                elif len(parts) == 3:
                    has_worker_col = True
                    rows.append((int(parts[0]), float(parts[1]), float(parts[2])))
                else:
                    raise ValueError(f"expected 2 or 3 fields, found {len(parts)}")
            except ValueError as exc:
                raise TraceFileError(f"{path}: line {lineno}: {exc}") from exc
    if has_worker_col:
        if worker_id is None:
            raise TraceFileError(f"{path}: file has worker ids, pick one to load")
        rows = [r for r in rows if r[0] == worker_id]
        if not rows:
            raise TraceFileError(f"{path}: no samples for worker {worker_id}")
    if not rows:
        raise TraceFileError(f"{path}: no samples")
    times = [r[1] for r in rows]
    rates = [r[2] for r in rows]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise TraceFileError(f"{path}: timestamps must be strictly increasing")
    return FileTrace(times, rates, worker_id=worker_id)


class BandwidthEstimator:
    """EWMA over observed transfer throughput.

    The first observation replaces the prior outright; afterwards
    estimate <- lam * sample + (1 - lam) * estimate.
    """

    def __init__(self, ewma_lambda: float = 0.3, prior: float | None = None):
        if not 0 < ewma_lambda <= 1:
            raise ValueError(f"ewma_lambda must be in (0, 1], got {ewma_lambda}")
        if prior is not None and prior <= 0:
            raise ValueError(f"prior must be positive, got {prior}")
        self.ewma_lambda = ewma_lambda
        self.prior = prior
        self._estimate: float | None = None
        self.count = 0

    def observe(self, bits: float, duration_s: float):
        if bits <= 0 or duration_s <= 0:
            raise ValueError("observation needs positive bits and duration")
        sample = bits / duration_s
        if self._estimate is None:
            self._estimate = sample
        else:
            lam = self.ewma_lambda
            self._estimate = lam * sample + (1 - lam) * self._estimate
        self.count += 1

    def estimate(self) -> float:
        if self._estimate is not None:
            return self._estimate
        if self.prior is not None:
            return self.prior
        raise ValueError("no observations yet and no prior configured")
