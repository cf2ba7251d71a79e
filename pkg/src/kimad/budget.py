"""Round time model and compression budgets.

A round must fit in t_budget_s seconds of wall time: downlink transfer,
then local compute for t_comp_s, then uplink transfer. Given a link rate
estimate b, the transferable window t_budget_s - t_comp_s is split between
the directions in ratio 1 : alpha_down, which yields the uplink budget

    c = b * (t_budget_s - t_comp_s) / (1 + alpha_down)

and a downlink budget of alpha_down * c. With alpha_down = 1 this is the
symmetric split c = b * (t - t_comp) / 2. When the downlink is not
simulated at all, the whole window goes to the uplink (one_way_budget).
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class TimeModel:
    """Per-round wall-time budget, compute time, and downlink/uplink ratio."""

    t_budget_s: float
    t_comp_s: float
    alpha_down: float = 1.0

    def __post_init__(self):
        if self.t_comp_s < 0:
            raise ValueError(f"t_comp_s must be >= 0, got {self.t_comp_s}")
        if self.t_budget_s <= self.t_comp_s:
            raise ValueError(
                f"t_budget_s ({self.t_budget_s}) must exceed t_comp_s ({self.t_comp_s})"
            )
        if self.alpha_down <= 0:
            raise ValueError(f"alpha_down must be positive, got {self.alpha_down}")

    @property
    def window_s(self) -> float:
        return self.t_budget_s - self.t_comp_s


def compression_budget(b_est: float, tm: TimeModel) -> float:
    """Uplink budget in bits for one round at estimated link rate b_est."""
    if b_est <= 0:
        raise ValueError(f"bandwidth estimate must be positive, got {b_est}")
    return b_est * tm.window_s / (1.0 + tm.alpha_down)


def downlink_budget(b_est: float, tm: TimeModel) -> float:
    """Downlink budget in bits: alpha_down times the uplink share."""
    return tm.alpha_down * compression_budget(b_est, tm)


def one_way_budget(b_est: float, tm: TimeModel) -> float:
    """Budget when only one direction is transferred in the whole window."""
    if b_est <= 0:
        raise ValueError(f"bandwidth estimate must be positive, got {b_est}")
    return b_est * tm.window_s


def round_time(bits_up: float, bits_down: float, b_up_true: float,
               b_down_true: float, tm: TimeModel) -> float:
    """Wall time of one round given actual transfer sizes and true rates."""
    if b_up_true <= 0 or b_down_true <= 0:
        raise ValueError("true link rates must be positive")
    if bits_up < 0 or bits_down < 0:
        raise ValueError("transfer sizes must be non-negative")
    return bits_down / b_down_true + tm.t_comp_s + bits_up / b_up_true
