"""Handoff timing: how long the MN may postpone finalizing a handoff.

All functions are pure; the mobile node passes in whatever state it has.
Times are in seconds here, not simulator microseconds.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence

TIER_COST = {"WLAN": 0, "WWAN": 1}


@dataclass(frozen=True)
class TimingInputs:
    remaining_window_bytes: float
    bottleneck_bps: float
    mn_cn_latency_s: float
    buffer_delivery_s: float

    def __post_init__(self):
        if self.bottleneck_bps <= 0:
            raise ValueError("bottleneck bandwidth must be positive")
        if min(self.remaining_window_bytes, self.mn_cn_latency_s, self.buffer_delivery_s) < 0:
            raise ValueError("timing inputs must be non-negative")


def tolerable_delay(inputs: TimingInputs) -> float:
    """Seconds the finalize step can still be postponed; negative means overdue."""
    return (inputs.remaining_window_bytes * 8 / inputs.bottleneck_bps
            - inputs.mn_cn_latency_s - inputs.buffer_delivery_s)


def buffer_delivery_time(missed_bytes: float, nar_bandwidth_bps: float, nar_rtt_s: float) -> float:
    """Time to drain the missed packets from the nAR buffer, assuming an idle nAR link."""
    if nar_bandwidth_bps <= 0:
        raise ValueError("nAR bandwidth must be positive")
    return nar_rtt_s + missed_bytes * 8 / nar_bandwidth_bps


class Action(str, enum.Enum):
    KEEP_WAITING = "keep_waiting"
    FINALIZE_HORIZONTAL = "finalize_horizontal"
    FINALIZE_VERTICAL = "finalize_vertical"
    HARD_DISCONNECT = "hard_disconnect"


class Reason(str, enum.Enum):
    NONE = ""
    PREFERRED_NETWORK_APPEARED = "PreferredNetworkAppeared"
    LOSS_BUDGET_EXHAUSTED = "LossBudgetExhausted"
    TOLERANCE_EXPIRED = "ToleranceExpired"


@dataclass(frozen=True)
class NarView:
    """What the MN knows about one candidate router at decision time."""

    name: str
    tier: str
    reachable: bool = True

    @property
    def cost(self) -> int:
        return TIER_COST[self.tier]


@dataclass(frozen=True)
class FinalizeDecision:
    action: Action
    target: Optional[str] = None
    reason: Reason = Reason.NONE
    tolerable_delay_s: Optional[float] = None

    @property
    def finalizes(self) -> bool:
        return self.action in (Action.FINALIZE_HORIZONTAL, Action.FINALIZE_VERTICAL)


KEEP_WAITING = FinalizeDecision(Action.KEEP_WAITING)


def _forced(nars: Sequence[NarView], current_tier: str, reason: Reason,
            t_t: Optional[float]) -> FinalizeDecision:
    reachable = [n for n in nars if n.reachable]
    if not reachable:
        return FinalizeDecision(Action.HARD_DISCONNECT, None, reason, t_t)
    best = min(reachable, key=lambda n: n.cost)  # stable: config order breaks ties
    action = (Action.FINALIZE_HORIZONTAL if best.cost <= TIER_COST[current_tier]
              else Action.FINALIZE_VERTICAL)
    return FinalizeDecision(action, best.name, reason, t_t)


def decide_finalize(elapsed_s: float, nars: Sequence[NarView], current_tier: str,
                    loss_budget: int, losses_so_far: int,
                    inputs: Optional[TimingInputs] = None) -> FinalizeDecision:
    """Decide whether an initiated handoff should be finalized now.

    ``elapsed_s`` is the time since the handoff was initiated. ``inputs`` is
    given for loss-intolerant (TCP) flows only; without it the tolerance rule
    is not applied.
    """
    current = TIER_COST[current_tier]
    t_t = tolerable_delay(inputs) if inputs is not None else None
    preferred = [n for n in nars if n.reachable and n.cost <= current]
    if preferred:
        return FinalizeDecision(Action.FINALIZE_HORIZONTAL, preferred[0].name,
                                Reason.PREFERRED_NETWORK_APPEARED, t_t)
    if losses_so_far >= loss_budget:
        return _forced(nars, current_tier, Reason.LOSS_BUDGET_EXHAUSTED, t_t)
    if t_t is not None and elapsed_s >= max(0.0, t_t):
        return _forced(nars, current_tier, Reason.TOLERANCE_EXPIRED, t_t)
    return FinalizeDecision(Action.KEEP_WAITING, None, Reason.NONE, t_t)
