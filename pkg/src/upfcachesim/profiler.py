"""Interval metric snapshots over simulator counters, and trend classification.

Rates are computed from counter deltas inside one profiling window; a window
with no accesses of a kind reports 0 for that rate by convention.  Trends
compare consecutive snapshots with a relative steady band, guarded by an
absolute floor so near-zero metrics do not amplify noise.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

EPS_STEADY_DEFAULT = 0.05
RELATIVE_FLOOR = 0.01


class ProfilerError(ValueError):
    pass


class Trend(Enum):
    RISING = "rising"
    STEADY = "steady"
    FALLING = "falling"


@dataclass(frozen=True)
class MetricsSnapshot:
    """One profiling interval's view of the data path.

    core_utilization is recorded for completeness (worker busy fraction)
    but drives no allocator transition.
    """

    t: float
    pcie_bandwidth: float
    ddio_write_miss_rate: float
    llc_miss_rate: float
    dram_bandwidth: float
    throughput_bps: float
    core_utilization: float = 0.0


ZERO_SNAPSHOT = MetricsSnapshot(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class IntervalCounters:
    """Raw counter deltas accumulated by the simulator inside one window."""

    ddio_writes: int = 0
    ddio_write_misses: int = 0
    core_accesses: int = 0
    core_misses: int = 0
    dram_bytes: int = 0
    pcie_bytes: int = 0
    tx_bits: int = 0
    worker_busy_ns: int = 0
    worker_count: int = 1


def _rate(misses: int, accesses: int) -> float:
    return misses / accesses if accesses else 0.0


def snapshot(counters: IntervalCounters, t: float, window: float) -> MetricsSnapshot:
    """Fold one window's counters into a MetricsSnapshot at time t."""
    if window <= 0:
        raise ProfilerError("profiler window must be > 0")
    busy_cap = counters.worker_count * window * 1e9
    return MetricsSnapshot(
        t=t,
        pcie_bandwidth=counters.pcie_bytes / window,
        ddio_write_miss_rate=_rate(counters.ddio_write_misses, counters.ddio_writes),
        llc_miss_rate=_rate(counters.core_misses, counters.core_accesses),
        dram_bandwidth=counters.dram_bytes / window,
        throughput_bps=counters.tx_bits / window,
        core_utilization=min(1.0, counters.worker_busy_ns / busy_cap) if busy_cap else 0.0,
    )


def classify(prev: float, cur: float, eps_steady: float = EPS_STEADY_DEFAULT,
             floor: float = RELATIVE_FLOOR) -> Trend:
    """Rising/Steady/Falling of cur relative to prev within a steady band.

    The relative change is taken against the larger magnitude (with an
    absolute floor), which makes the classification exactly antisymmetric:
    if a -> b is Rising then b -> a is Falling for the same band.
    """
    rel = (cur - prev) / max(abs(prev), abs(cur), floor)
    if rel > eps_steady:
        return Trend.RISING
    if rel < -eps_steady:
        return Trend.FALLING
    return Trend.STEADY


@dataclass(frozen=True)
class MetricsDelta:
    pcie_bandwidth: Trend
    ddio_write_miss_rate: Trend
    llc_miss_rate: Trend
    diffs: tuple[float, float, float]


def delta_and_classify(prev: MetricsSnapshot, cur: MetricsSnapshot,
                       eps_steady: float = EPS_STEADY_DEFAULT) -> MetricsDelta:
    if cur.t <= prev.t:
        raise ProfilerError("snapshots must have strictly increasing timestamps")
    return MetricsDelta(
        pcie_bandwidth=classify(prev.pcie_bandwidth, cur.pcie_bandwidth, eps_steady),
        ddio_write_miss_rate=classify(prev.ddio_write_miss_rate, cur.ddio_write_miss_rate, eps_steady),
        llc_miss_rate=classify(prev.llc_miss_rate, cur.llc_miss_rate, eps_steady),
        diffs=(
            cur.pcie_bandwidth - prev.pcie_bandwidth,
            cur.ddio_write_miss_rate - prev.ddio_write_miss_rate,
            cur.llc_miss_rate - prev.llc_miss_rate,
        ),
    )
