"""Deterministic open-loop packet arrival generation.

Arrivals are a Poisson process (exponential inter-arrival times) at the
offered rate, optionally gated by an on/off burst pattern: during on
periods the instantaneous rate is offered_rate * burst_multiplier, during
off periods no packets arrive.  The long-run mean rate therefore equals
offered_rate * burst_multiplier * on/(on+off); pick multiplier =
(on+off)/on to keep the long-run mean at offered_rate.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

MIN_PACKET_BYTES = 64
MAX_PACKET_BYTES = 1500


class TrafficError(ValueError):
    """Invalid traffic profile."""


@dataclass(frozen=True)
class FixedSize:
    size: int


@dataclass(frozen=True)
class SizeMixture:
    """Discrete packet-size mixture; weights must sum to one."""

    items: tuple[tuple[int, float], ...]


@dataclass(frozen=True)
class OnOffBurst:
    on_seconds: float
    off_seconds: float
    multiplier: float


@dataclass(frozen=True)
class Packet:
    id: int
    size: int
    arrival_time: float


@dataclass(frozen=True)
class TrafficProfile:
    size_model: FixedSize | SizeMixture = FixedSize(1500)
    offered_rate: float = 1_000_000.0
    duration: float = 0.02
    seed: int = 1
    burst: OnOffBurst | None = None

    def validate(self) -> None:
        if self.offered_rate <= 0:
            raise TrafficError("traffic.offered_rate must be > 0")
        if self.duration <= 0:
            raise TrafficError("traffic.duration must be > 0")
        if isinstance(self.size_model, FixedSize):
            sizes = [self.size_model.size]
        elif isinstance(self.size_model, SizeMixture):
            if not self.size_model.items:
                raise TrafficError("traffic.size_model: mixture must not be empty")
            sizes = [s for s, _ in self.size_model.items]
            weights = [w for _, w in self.size_model.items]
            if any(w < 0 for w in weights):
                raise TrafficError("traffic.size_model: weights must be non-negative")
            if abs(sum(weights) - 1.0) > 1e-9:
                raise TrafficError("traffic.size_model: weights must sum to 1")
        else:
            raise TrafficError("traffic.size_model: unknown size model")
        for s in sizes:
            if not MIN_PACKET_BYTES <= s <= MAX_PACKET_BYTES:
                raise TrafficError(
                    f"traffic.size_model: packet size {s} outside "
                    f"[{MIN_PACKET_BYTES}, {MAX_PACKET_BYTES}]"
                )
        if self.burst is not None:
            b = self.burst
            if b.on_seconds <= 0 or b.off_seconds < 0 or b.multiplier <= 0:
                raise TrafficError("traffic.burst: periods and multiplier must be positive")

    def mean_rate(self) -> float:
        """Long-run mean arrival rate implied by the profile."""
        if self.burst is None:
            return self.offered_rate
        duty = self.burst.on_seconds / (self.burst.on_seconds + self.burst.off_seconds)
        return self.offered_rate * self.burst.multiplier * duty


def _arrival_times(profile: TrafficProfile, rng: np.random.Generator) -> np.ndarray:
    rate = profile.offered_rate
    duration = profile.duration
    if profile.burst is None:
        times = []
        t = 0.0
        # draw in chunks; expected count rate*duration
        chunk = max(1024, int(rate * duration * 0.25) + 1)
        while t < duration:
            gaps = rng.exponential(1.0 / rate, size=chunk)
            arr = t + np.cumsum(gaps)
            times.append(arr)
            t = float(arr[-1])
        all_times = np.concatenate(times)
        return all_times[all_times < duration]
    b = profile.burst
    rate_on = rate * b.multiplier
    cycle = b.on_seconds + b.off_seconds
    out = []
    start = 0.0
    while start < duration:
        on_end = min(start + b.on_seconds, duration)
        t = start
        while t < on_end:
            gaps = rng.exponential(1.0 / rate_on, size=1024)
            arr = t + np.cumsum(gaps)
            out.append(arr[arr < on_end])
            t = float(arr[-1])
        start += cycle
    return np.concatenate(out) if out else np.empty(0)


def generate(profile: TrafficProfile) -> list[Packet]:
    """Generate the full arrival stream; deterministic for a fixed seed."""
    profile.validate()
    rng = np.random.default_rng(profile.seed)
    times = _arrival_times(profile, rng)
    n = len(times)
    if isinstance(profile.size_model, FixedSize):
        sizes = np.full(n, profile.size_model.size, dtype=np.int64)
    else:
        values = np.array([s for s, _ in profile.size_model.items], dtype=np.int64)
        weights = np.array([w for _, w in profile.size_model.items], dtype=np.float64)
        sizes = rng.choice(values, size=n, p=weights / weights.sum())
    return [Packet(i, int(sizes[i]), float(times[i])) for i in range(n)]


def write_csv(packets: Iterable[Packet], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "size", "arrival_time"])
        for p in packets:
            w.writerow([p.id, p.size, repr(p.arrival_time)])


def read_csv(path: str | Path) -> list[Packet]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header != ["id", "size", "arrival_time"]:
            raise TrafficError(f"traffic csv: unexpected header {header}")
        return [Packet(int(i), int(s), float(t)) for i, s, t in r]
