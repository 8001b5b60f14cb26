"""Online DDIO-way allocator: a four-state bottleneck classifier.

The transition function keys on three signals per profiling interval: PCIe
bandwidth against a load threshold, and the trends of the DDIO write miss
rate and the core LLC miss rate.  Low PCIe bandwidth dominates every other
guard and parks the machine in the no-bottleneck state.  A DDIO bottleneck
grows the DDIO partition one step per interval until the write miss rate
stops moving; a core bottleneck shrinks it likewise; the balance state
holds the current split, including when both miss rates are rising at once
(both sides short of cache keeps the current allocation).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from .profiler import (
    EPS_STEADY_DEFAULT,
    MetricsDelta,
    MetricsSnapshot,
    Trend,
    ZERO_SNAPSHOT,
    delta_and_classify,
)


class AllocatorState(Enum):
    NO_BOTTLENECK = "no_bottleneck"
    DDIO_CORE_BALANCE = "ddio_core_balance"
    DDIO_BOTTLENECK = "ddio_bottleneck"
    CORE_BOTTLENECK = "core_bottleneck"


class ActionKind(Enum):
    GROW_DDIO = "grow_ddio"
    SHRINK_DDIO = "shrink_ddio"
    HOLD = "hold"


@dataclass(frozen=True)
class AllocatorAction:
    kind: ActionKind
    step: int = 0

    @classmethod
    def hold(cls) -> "AllocatorAction":
        return cls(ActionKind.HOLD, 0)


@dataclass(frozen=True)
class AllocatorConfig:
    pcie_bw_thr: float = 3.125e9  # bytes/s; 25% of a 100 Gbps NIC
    eps_steady: float = EPS_STEADY_DEFAULT
    min_ddio_ways: int = 2
    max_ddio_ways: int = 8
    step: int = 1

    def validate(self, total_ways: int) -> None:
        if not 1 <= self.min_ddio_ways <= self.max_ddio_ways <= total_ways - 1:
            raise ValueError(
                "allocator: need 1 <= min_ddio_ways <= max_ddio_ways <= ways - 1"
            )
        if self.step < 1:
            raise ValueError("allocator.step must be >= 1")
        if self.pcie_bw_thr < 0:
            raise ValueError("allocator.pcie_bw_thr must be >= 0")


def transition(state: AllocatorState, delta: MetricsDelta, snapshot: MetricsSnapshot,
               cfg: AllocatorConfig) -> tuple[AllocatorState, AllocatorAction]:
    """Next state and way-resize action for one interval.  Total function."""
    if snapshot.pcie_bandwidth <= cfg.pcie_bw_thr:
        nxt = AllocatorState.NO_BOTTLENECK
    elif state is AllocatorState.NO_BOTTLENECK:
        nxt = AllocatorState.DDIO_BOTTLENECK
    elif state is AllocatorState.DDIO_BOTTLENECK:
        if delta.ddio_write_miss_rate is Trend.STEADY:
            nxt = AllocatorState.DDIO_CORE_BALANCE
        else:
            nxt = AllocatorState.DDIO_BOTTLENECK
    elif state is AllocatorState.DDIO_CORE_BALANCE:
        ddio_up = delta.ddio_write_miss_rate is Trend.RISING
        core_up = delta.llc_miss_rate is Trend.RISING
        if ddio_up and core_up:
            nxt = AllocatorState.DDIO_CORE_BALANCE  # both short: keep allocation
        elif ddio_up:
            nxt = AllocatorState.DDIO_BOTTLENECK
        elif core_up:
            nxt = AllocatorState.CORE_BOTTLENECK
        else:
            nxt = AllocatorState.DDIO_CORE_BALANCE
    else:  # CORE_BOTTLENECK
        if delta.llc_miss_rate is Trend.STEADY:
            nxt = AllocatorState.DDIO_CORE_BALANCE
        else:
            nxt = AllocatorState.CORE_BOTTLENECK

    if nxt is AllocatorState.DDIO_BOTTLENECK:
        action = AllocatorAction(ActionKind.GROW_DDIO, cfg.step)
    elif nxt is AllocatorState.CORE_BOTTLENECK:
        action = AllocatorAction(ActionKind.SHRINK_DDIO, cfg.step)
    else:
        action = AllocatorAction.hold()
    return nxt, action


@dataclass(frozen=True)
class AdjustmentRecord:
    t: float
    state: AllocatorState
    action: AllocatorAction
    ddio_ways: int


@dataclass
class OnlineAllocator:
    """Interval controller that applies the state machine to a running sim.

    Use as the pipeline controller hook: it receives each interval's
    MetricsSnapshot plus a resize callable and appends one AdjustmentRecord
    per interval.  Requested resizes are clamped to [min, max]; a clamped or
    rejected resize degrades the recorded action to Hold.
    """

    cfg: AllocatorConfig
    state: AllocatorState = AllocatorState.NO_BOTTLENECK
    log: list[AdjustmentRecord] = field(default_factory=list)
    _prev: MetricsSnapshot = ZERO_SNAPSHOT

    def on_interval(self, snap: MetricsSnapshot, ddio_ways: int,
                    resize: Callable[[int], bool]) -> int:
        """Advance one interval; returns the DDIO way count after the action."""
        delta = delta_and_classify(self._prev, snap, self.cfg.eps_steady)
        self._prev = snap
        self.state, action = transition(self.state, delta, snap, self.cfg)
        applied = action
        ways = ddio_ways
        if action.kind is ActionKind.GROW_DDIO:
            target = min(ddio_ways + action.step, self.cfg.max_ddio_ways)
        elif action.kind is ActionKind.SHRINK_DDIO:
            target = max(ddio_ways - action.step, self.cfg.min_ddio_ways)
        else:
            target = ddio_ways
        if target != ddio_ways:
            if resize(target):
                ways = target
            else:
                applied = AllocatorAction.hold()
        elif action.kind is not ActionKind.HOLD:
            applied = AllocatorAction.hold()  # already at the clamp boundary
        self.log.append(AdjustmentRecord(snap.t, self.state, applied, ways))
        return ways

    def hook(self) -> Callable[[MetricsSnapshot, int, Callable[[int], bool]], int]:
        return self.on_interval
