"""Closed-form DMA-leakage model and its Monte Carlo cross-check.

Inbound packet cache lines are modeled as N balls thrown independently and
uniformly into the M lines of the DDIO partition; every extra ball landing
in an occupied bin is one line leaked to DRAM.  The expectation has the
closed form N - M + M*(1 - 1/M)**N, and the empty-bin count is strongly
concentrated, so the mean is a faithful summary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_MC_CHUNK_ELEMS = 20_000_000  # bound per-chunk memory in the Monte Carlo path


@dataclass(frozen=True)
class DescriptorFootprint:
    """How a descriptor ring translates into in-flight cache lines."""

    descriptor_count: int
    packet_bytes: int = 1500
    line_bytes: int = 64
    mbuf_stride_bytes: int = 2048

    def __post_init__(self) -> None:
        for name in ("descriptor_count", "packet_bytes", "line_bytes", "mbuf_stride_bytes"):
            if getattr(self, name) < 1:
                raise ValueError(f"footprint: {name} must be positive")

    @property
    def lines_per_packet(self) -> int:
        return -(-self.packet_bytes // self.line_bytes)

    @property
    def total_lines(self) -> int:
        return self.descriptor_count * self.lines_per_packet


@dataclass(frozen=True)
class LeakageParams:
    n_balls: int
    m_bins: int
    footprint: DescriptorFootprint | None = None

    def __post_init__(self) -> None:
        if self.m_bins < 1:
            raise ValueError("m_bins must be >= 1")
        if self.n_balls < 0:
            raise ValueError("n_balls must be >= 0")

    @classmethod
    def from_footprint(cls, footprint: DescriptorFootprint, ddio_bytes: int) -> "LeakageParams":
        if ddio_bytes < footprint.line_bytes:
            raise ValueError("ddio_bytes must hold at least one line")
        return cls(
            n_balls=footprint.total_lines,
            m_bins=ddio_bytes // footprint.line_bytes,
            footprint=footprint,
        )


def descriptor_footprint(descriptors: int, packet_bytes: int, line_bytes: int = 64) -> int:
    """In-flight line count N for a ring of descriptors holding full packets."""
    return DescriptorFootprint(descriptors, packet_bytes, line_bytes).total_lines


def empty_bin_fraction(n: int, m: int) -> float:
    """(1 - 1/M)**N, evaluated in the log domain to survive large N."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return 1.0
    if m == 1:
        return 0.0
    return math.exp(n * math.log1p(-1.0 / m))


def expected_leakage(n: int, m: int) -> float:
    """Expected leaked lines: N - M + M*(1 - 1/M)**N."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if n < 0:
        raise ValueError("n must be >= 0")
    return n - m + m * empty_bin_fraction(n, m)


def leakage_ratio(n: int, m: int) -> float:
    """Fraction of in-flight lines expected to leak, in [0, 1)."""
    if n < 1:
        raise ValueError("leakage ratio is undefined for n = 0")
    return expected_leakage(n, m) / n


def concentration_bound(m: int, epsilon: float, p_prime: float) -> float:
    """Tail bound 2e*sqrt(M)*exp(-M*eps^2 / (3*p')) on |empty bins - mean| >= eps*M.

    The bound is not clipped; values above 1 are vacuous but returned as-is.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must be in (0, 1)")
    if not 0.0 < p_prime <= 1.0:
        raise ValueError("p_prime must be in (0, 1]")
    return 2.0 * math.e * math.sqrt(m) * math.exp(-m * epsilon * epsilon / (3.0 * p_prime))


@dataclass(frozen=True)
class MonteCarloLeakage:
    mean: float
    stderr: float
    trials: int
    samples: np.ndarray | None = None


def monte_carlo_leakage(n: int, m: int, trials: int, seed: int,
                        keep_samples: bool = False) -> MonteCarloLeakage:
    """Throw n balls into m bins `trials` times; leaked = n - distinct bins.

    Deterministic for a fixed seed.  Distinct-bin counting sorts each trial's
    throws, which keeps memory linear in the chunk size.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if n < 0:
        raise ValueError("n must be >= 0")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    leaked = np.empty(trials, dtype=np.int64)
    if n == 0:
        leaked[:] = 0
    else:
        chunk = max(1, _MC_CHUNK_ELEMS // n)
        done = 0
        while done < trials:
            k = min(chunk, trials - done)
            throws = rng.integers(0, m, size=(k, n), dtype=np.int64)
            throws.sort(axis=1)
            distinct = 1 + (np.diff(throws, axis=1) != 0).sum(axis=1)
            leaked[done:done + k] = n - distinct
            done += k
    mean = float(leaked.mean())
    stderr = float(leaked.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return MonteCarloLeakage(
        mean=mean, stderr=stderr, trials=trials,
        samples=leaked if keep_samples else None,
    )
