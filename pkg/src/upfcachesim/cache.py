"""Set-associative last-level cache model with a DDIO/core way partition.

The cache is a single level, physically indexed by line id (byte address /
line size), with strict per-set LRU replacement inside an allocation way
mask that depends on who is accessing: inbound NIC DMA (DDIO writes) may
only allocate in the DDIO ways, CPU cores allocate in all ways when the
partition is shared and only in the core ways when it is isolated, and
outbound NIC DMA (DDIO reads) never allocates and reads through to DRAM
on a miss.  Hits are honoured wherever the line currently resides, so a
partition resize never invalidates residency (lazy repartition).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numba import njit


class CacheModelError(ValueError):
    """Invalid geometry, partition, or access request."""


class PartitionMode(Enum):
    SHARED = "shared"
    ISOLATED = "isolated"


class AccessKind(Enum):
    DDIO_WRITE = "ddio_write"
    DDIO_READ = "ddio_read"
    CORE_READ = "core_read"
    CORE_WRITE = "core_write"


_WRITE_KINDS = (AccessKind.DDIO_WRITE, AccessKind.CORE_WRITE)


@dataclass(frozen=True)
class CacheGeometry:
    """LLC shape; defaults match an 11-way 33 MB cache with 64 B lines."""

    total_bytes: int = 33 * 1024 * 1024
    ways: int = 11
    line_bytes: int = 64

    def __post_init__(self) -> None:
        if self.ways < 1 or self.total_bytes < 1:
            raise CacheModelError("geometry: ways and total_bytes must be positive")
        if self.line_bytes < 1 or self.line_bytes & (self.line_bytes - 1):
            raise CacheModelError("geometry: line_bytes must be a power of two")
        if self.total_bytes % (self.ways * self.line_bytes):
            raise CacheModelError(
                "geometry: total_bytes must be a multiple of ways * line_bytes"
            )

    @property
    def sets(self) -> int:
        return self.total_bytes // (self.ways * self.line_bytes)

    @property
    def lines(self) -> int:
        return self.total_bytes // self.line_bytes


@dataclass
class PartitionPolicy:
    """DDIO/core way split.

    Way layout is contiguous: ways [0, ddio_ways) belong to DDIO, the next
    core_ways ways belong to the cores (isolated mode only), and any ways
    left over are "others" (control-plane traffic, never accessed here).
    core_ways=None means all non-DDIO ways.
    """

    mode: PartitionMode = PartitionMode.SHARED
    ddio_ways: int = 2
    core_ways: int | None = None

    def validate(self, ways: int) -> None:
        if not 1 <= self.ddio_ways <= ways:
            raise CacheModelError(f"partition: ddio_ways must be in [1, {ways}]")
        if self.mode is PartitionMode.ISOLATED:
            core = self.effective_core_ways(ways)
            if core < 1:
                raise CacheModelError("partition: isolated mode needs at least 1 core way")
            if self.ddio_ways + core > ways:
                raise CacheModelError("partition: ddio_ways + core_ways exceeds total ways")

    def effective_core_ways(self, ways: int) -> int:
        if self.mode is PartitionMode.SHARED:
            return ways
        if self.core_ways is None:
            return ways - self.ddio_ways
        return self.core_ways


@dataclass(frozen=True)
class AccessOutcome:
    hit: bool
    evicted_line: int | None
    dram_bytes_moved: int


@dataclass
class KindStats:
    accesses: int = 0
    hits: int = 0
    misses: int = 0


@dataclass
class CacheStats:
    """Counters since construction or the last reset.

    dram_bytes_total is line_bytes * (fills + writebacks), where fills
    count every line moved out of DRAM (allocating misses and DDIO
    read-throughs) and writebacks count dirty evictions.
    """

    per_kind: dict[AccessKind, KindStats] = field(
        default_factory=lambda: {k: KindStats() for k in AccessKind}
    )
    evictions: int = 0
    fills: int = 0
    writebacks: int = 0
    dram_bytes_total: int = 0

    def copy(self) -> "CacheStats":
        return CacheStats(
            per_kind={k: KindStats(v.accesses, v.hits, v.misses) for k, v in self.per_kind.items()},
            evictions=self.evictions,
            fills=self.fills,
            writebacks=self.writebacks,
            dram_bytes_total=self.dram_bytes_total,
        )


@dataclass(frozen=True)
class SpanOutcome:
    """Aggregate result of accessing a run of consecutive lines."""

    accesses: int
    hits: int
    fills: int
    writebacks: int
    evictions: int
    dram_bytes_moved: int

    @property
    def misses(self) -> int:
        return self.accesses - self.hits


@njit(cache=True)
def _span_kernel(tags, stamp, dirty, tick, base, n, sets, ways, lo, hi, allocate, write):
    """Access lines [base, base+n); returns (hits, fills, wbs, evictions, last_evicted, tick).

    Hit lookup scans every way of the set; allocation picks the first empty
    way in [lo, hi), otherwise the stamp-minimal (LRU) way in that window.
    Stamps are unique so there are no LRU ties.
    """
    hits = 0
    fills = 0
    wbs = 0
    evictions = 0
    last_evicted = np.int64(-1)
    for line in range(base, base + n):
        s = line % sets
        b = s * ways
        found = -1
        for i in range(b, b + ways):
            if tags[i] == line:
                found = i
                break
        if found >= 0:
            hits += 1
            tick += 1
            stamp[found] = tick
            if write:
                dirty[found] = 1
            continue
        if not allocate:
            fills += 1  # read-through, no residency change
            continue
        victim = -1
        oldest = np.int64(0x7FFFFFFFFFFFFFFF)
        for i in range(b + lo, b + hi):
            if tags[i] == -1:
                victim = i
                oldest = np.int64(-1)
                break
            if stamp[i] < oldest:
                oldest = stamp[i]
                victim = i
        if tags[victim] != -1:
            evictions += 1
            last_evicted = tags[victim]
            if dirty[victim] == 1:
                wbs += 1
        fills += 1
        tags[victim] = line
        tick += 1
        stamp[victim] = tick
        dirty[victim] = 1 if write else 0
    return hits, fills, wbs, evictions, last_evicted, tick


class WayPartitionedCache:
    """Single-owner mutable cache state; no internal locking."""

    def __init__(self, geometry: CacheGeometry | None = None,
                 partition: PartitionPolicy | None = None) -> None:
        self.geometry = geometry or CacheGeometry()
        self.partition = partition or PartitionPolicy()
        self.partition.validate(self.geometry.ways)
        n = self.geometry.sets * self.geometry.ways
        self._tags = np.full(n, -1, dtype=np.int64)
        self._stamp = np.zeros(n, dtype=np.int64)
        self._dirty = np.zeros(n, dtype=np.uint8)
        self._tick = 0
        # others ways are fixed at construction; resize moves the DDIO/core split
        self._others = self.geometry.ways - self.partition.ddio_ways - \
            self.partition.effective_core_ways(self.geometry.ways)
        self.stats = CacheStats()

    @property
    def ddio_ways(self) -> int:
        return self.partition.ddio_ways

    @property
    def core_ways(self) -> int:
        return self.partition.effective_core_ways(self.geometry.ways)

    def _mask(self, kind: AccessKind) -> tuple[int, int, bool]:
        """(lo, hi, allocate) allocation window for an access kind."""
        ways = self.geometry.ways
        d = self.partition.ddio_ways
        if kind is AccessKind.DDIO_WRITE:
            return 0, d, True
        if kind is AccessKind.DDIO_READ:
            return 0, 0, False
        if self.partition.mode is PartitionMode.SHARED:
            return 0, ways, True
        return d, d + self.core_ways, True

    def access(self, line: int, kind: AccessKind, dirty: bool | None = None) -> AccessOutcome:
        """Access one line; see access_span for the bulk path."""
        out = self._run(line, 1, kind, dirty, want_evicted=True)
        return out

    def access_span(self, base_line: int, n_lines: int, kind: AccessKind,
                    dirty: bool | None = None) -> SpanOutcome:
        """Access n_lines consecutive lines starting at base_line.

        Equivalent to n_lines individual access() calls in line order, but
        returns aggregate counts only.
        """
        if n_lines < 1:
            raise CacheModelError("access_span: n_lines must be >= 1")
        hits, fills, wbs, ev, _, _ = self._dispatch(base_line, n_lines, kind, dirty)
        lb = self.geometry.line_bytes
        return SpanOutcome(
            accesses=n_lines, hits=hits, fills=fills, writebacks=wbs,
            evictions=ev, dram_bytes_moved=lb * (fills + wbs),
        )

    def _run(self, line: int, n: int, kind: AccessKind, dirty: bool | None,
             want_evicted: bool) -> AccessOutcome:
        hits, fills, wbs, ev, last_evicted, _ = self._dispatch(line, n, kind, dirty)
        lb = self.geometry.line_bytes
        return AccessOutcome(
            hit=hits == 1,
            evicted_line=int(last_evicted) if (want_evicted and ev) else None,
            dram_bytes_moved=lb * (fills + wbs),
        )

    def _dispatch(self, base: int, n: int, kind: AccessKind, dirty: bool | None):
        if not isinstance(base, (int, np.integer)) or base < 0:
            raise CacheModelError(
                f"line identifier {base!r} is outside the modeled address space"
            )
        if not isinstance(kind, AccessKind):
            raise CacheModelError(f"unknown access kind {kind!r}")
        write = (kind in _WRITE_KINDS) if dirty is None else bool(dirty)
        lo, hi, allocate = self._mask(kind)
        hits, fills, wbs, ev, last_evicted, tick = _span_kernel(
            self._tags, self._stamp, self._dirty, self._tick,
            base, n, self.geometry.sets, self.geometry.ways, lo, hi, allocate, write,
        )
        self._tick = tick
        ks = self.stats.per_kind[kind]
        ks.accesses += n
        ks.hits += hits
        ks.misses += n - hits
        self.stats.evictions += ev
        self.stats.fills += fills
        self.stats.writebacks += wbs
        self.stats.dram_bytes_total += self.geometry.line_bytes * (fills + wbs)
        return hits, fills, wbs, ev, last_evicted, tick

    def resize_ddio_ways(self, new_ddio_ways: int) -> None:
        """Move the DDIO/core split; resident lines stay until evicted.

        Raises CacheModelError and leaves the partition unchanged when the
        request falls outside what the partition allows.
        """
        ways = self.geometry.ways
        if not isinstance(new_ddio_ways, (int, np.integer)):
            raise CacheModelError("resize: new_ddio_ways must be an integer")
        if self.partition.mode is PartitionMode.SHARED:
            if not 1 <= new_ddio_ways <= ways:
                raise CacheModelError(f"resize: ddio_ways must be in [1, {ways}]")
            self.partition.ddio_ways = int(new_ddio_ways)
            return
        new_core = ways - self._others - int(new_ddio_ways)
        if new_ddio_ways < 1 or new_core < 1:
            raise CacheModelError(
                f"resize: ddio_ways must be in [1, {ways - self._others - 1}] "
                "to keep at least one core way"
            )
        self.partition.ddio_ways = int(new_ddio_ways)
        self.partition.core_ways = new_core

    def snapshot_stats(self) -> CacheStats:
        return self.stats.copy()

    def reset_stats(self) -> None:
        self.stats = CacheStats()

    # Introspection for tests and invariant checks; not on the hot path.
    def resident(self, line: int) -> bool:
        s = line % self.geometry.sets
        b = s * self.geometry.ways
        return bool((self._tags[b:b + self.geometry.ways] == line).any())

    def set_contents(self, set_index: int) -> list[int | None]:
        """Per-way resident line ids (None for empty ways) of one set."""
        b = set_index * self.geometry.ways
        row = self._tags[b:b + self.geometry.ways]
        return [int(t) if t >= 0 else None for t in row]

    def way_of(self, line: int) -> int | None:
        s = line % self.geometry.sets
        b = s * self.geometry.ways
        hits = np.nonzero(self._tags[b:b + self.geometry.ways] == line)[0]
        return int(hits[0]) if hits.size else None
