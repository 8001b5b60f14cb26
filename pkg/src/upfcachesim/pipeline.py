"""Discrete-event simulation of the UPF packet data path.

One packet flows NIC -> descriptor ring -> LB thread -> worker thread ->
NIC.  The NIC DMA-writes packet lines into the mbuf bound to the next
descriptor (DDIO writes against the cache model; a full ring drops the
packet).  The LB thread polls filled descriptors in batches: it core-reads
the packet lines (a miss stalls it for a DRAM access per line -- the leaky
DMA penalty), pops a fresh mbuf from the head of the free ring, touches
that mbuf's header line (cold mbufs cost a DRAM access here), rebinds the
descriptor, and queues the filled mbuf for the workers.  Workers charge a
fixed processing cost plus core read/write passes over the packet lines,
then transmit via DDIO reads (read-through on miss) and recycle the mbuf to
the tail of the free ring.

The simulator itself is single-threaded and deterministic: one event queue
ordered by (timestamp in integer nanoseconds, insertion sequence number).
"""
from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from .cache import (
    AccessKind,
    CacheGeometry,
    CacheModelError,
    PartitionPolicy,
    WayPartitionedCache,
)
from .errors import ConfigError, InvariantViolation
from .profiler import IntervalCounters, MetricsSnapshot
from .profiler import snapshot as make_snapshot
from .traffic import MAX_PACKET_BYTES, Packet, TrafficProfile, generate

# Controller hook: (snapshot, current ddio ways, resize(n) -> bool) -> ignored
Controller = Callable[[MetricsSnapshot, int, Callable[[int], bool]], object]


class MbufState(Enum):
    FREE_IN_RING = "free_in_ring"
    BOUND_TO_DESCRIPTOR = "bound_to_descriptor"
    FILLED_PENDING = "filled_pending"
    IN_QUEUE = "in_queue"
    IN_WORKER = "in_worker"


@dataclass(frozen=True)
class Mbuf:
    id: int
    base_line: int
    lines: int
    state: MbufState


@dataclass(frozen=True)
class TimingConfig:
    llc_hit_ns: int = 16
    dram_access_ns: int = 80
    per_packet_proc_ns: int = 300
    poll_batch: int = 32

    def validate(self) -> None:
        if min(self.llc_hit_ns, self.dram_access_ns, self.per_packet_proc_ns) < 1:
            raise ConfigError("pipeline.timing: latencies must be >= 1 ns")
        if self.poll_batch < 1:
            raise ConfigError("pipeline.timing.poll_batch must be >= 1")


@dataclass
class PipelineConfig:
    descriptor_count: int = 4096
    mbuf_ring_size: int = 262140
    mbuf_stride: int = 2048
    queue_capacity: int | None = None  # None means mbuf_ring_size
    lb_cores: int = 1
    worker_cores: int = 6
    timing: TimingConfig = field(default_factory=TimingConfig)
    partition: PartitionPolicy = field(default_factory=PartitionPolicy)
    geometry: CacheGeometry = field(default_factory=CacheGeometry)
    profile_interval: float = 0.01
    nic_line_rate_bps: float = 100e9

    def validate(self) -> None:
        if self.descriptor_count < 1:
            raise ConfigError("pipeline.descriptor_count must be >= 1")
        if self.mbuf_ring_size < self.descriptor_count + 1:
            raise ConfigError(
                "pipeline.mbuf_ring_size must be >= descriptor_count + 1 "
                f"(got {self.mbuf_ring_size} for {self.descriptor_count} descriptors)"
            )
        lb = self.geometry.line_bytes
        if self.mbuf_stride < MAX_PACKET_BYTES:
            raise ConfigError("pipeline.mbuf_stride must hold a full-size packet")
        if self.mbuf_stride % lb:
            raise ConfigError("pipeline.mbuf_stride must be a multiple of line_bytes")
        if self.queue_capacity is not None and self.queue_capacity < 1:
            raise ConfigError("pipeline.queue_capacity must be >= 1 (or null)")
        if self.lb_cores < 1:
            raise ConfigError("pipeline.lb_cores must be >= 1")
        if self.worker_cores < 1:
            raise ConfigError("pipeline.worker_cores must be >= 1")
        if self.profile_interval <= 0:
            raise ConfigError("pipeline.profile_interval must be > 0")
        if self.nic_line_rate_bps <= 0:
            raise ConfigError("pipeline.nic_line_rate_bps must be > 0")
        self.timing.validate()
        try:
            self.partition.validate(self.geometry.ways)
        except CacheModelError as exc:
            raise ConfigError(f"pipeline.partition: {exc}") from exc

    @property
    def effective_queue_capacity(self) -> int:
        return self.queue_capacity if self.queue_capacity is not None else self.mbuf_ring_size


@dataclass(frozen=True)
class TimelineRow:
    t: float
    throughput_bps: float
    loss_rate: float
    ddio_write_miss_rate: float
    rx_llc_miss_rate: float
    tx_llc_miss_rate: float
    dram_Bps: float
    pcie_Bps: float
    ddio_ways: int


@dataclass
class SimResult:
    throughput_bps: float
    offered_load_bps: float
    packet_loss_rate: float
    ddio_write_miss_rate: float
    rx_llc_miss_rate: float
    tx_llc_miss_rate: float
    dram_bytes_per_second: float
    mbuf_shortage_events: int
    arrivals: int
    transmitted: int
    dropped: int
    duration: float
    final_ddio_ways: int
    timeline: list[TimelineRow] = field(default_factory=list)

    def to_dict(self, with_timeline: bool = False) -> dict:
        d = {
            "throughput_bps": self.throughput_bps,
            "offered_load_bps": self.offered_load_bps,
            "packet_loss_rate": self.packet_loss_rate,
            "ddio_write_miss_rate": self.ddio_write_miss_rate,
            "rx_llc_miss_rate": self.rx_llc_miss_rate,
            "tx_llc_miss_rate": self.tx_llc_miss_rate,
            "dram_bytes_per_second": self.dram_bytes_per_second,
            "mbuf_shortage_events": self.mbuf_shortage_events,
            "arrivals": self.arrivals,
            "transmitted": self.transmitted,
            "dropped": self.dropped,
            "duration": self.duration,
            "final_ddio_ways": self.final_ddio_ways,
        }
        if with_timeline:
            d["timeline"] = [vars(r) for r in self.timeline]
        return d


# Event codes; lower code does not imply priority -- ordering is (t, seq).
_EV_ARRIVAL, _EV_LB, _EV_WORKER, _EV_TICK = 0, 1, 2, 3
_LB_IDLE, _LB_RUN, _LB_BLOCK_MBUF, _LB_BLOCK_QUEUE = 0, 1, 2, 3


class _Simulation:
    def __init__(self, packets: list[Packet], config: PipelineConfig,
                 controller: Controller | None, duration: float) -> None:
        self.cfg = config
        self.controller = controller
        self.duration = duration
        geom = config.geometry
        # the cache owns a private partition so controller resizes never
        # leak back into the caller's config
        part = PartitionPolicy(config.partition.mode, config.partition.ddio_ways,
                               config.partition.core_ways)
        self.cache = WayPartitionedCache(geom, part)
        self.line_bytes = geom.line_bytes
        self.stride_lines = config.mbuf_stride // geom.line_bytes

        self.arr_t_ns = []
        self.arr_size = []
        prev = -1
        for p in packets:
            t = int(round(p.arrival_time * 1e9))
            if t < prev:
                raise ConfigError("traffic: arrival times must be non-decreasing")
            prev = t
            self.arr_t_ns.append(t)
            self.arr_size.append(p.size)

        d = config.descriptor_count
        self.D = d
        self.RX_b = config.mbuf_ring_size
        self.slot_mbuf = list(range(d))
        self.slot_size = [0] * d
        self.free = deque(range(d, self.RX_b))
        self.nic_pos = 0
        self.lb_pos = 0
        self.queue: deque[tuple[int, int]] = deque()
        self.qcap = config.effective_queue_capacity

        self.n_workers = config.worker_cores
        self.worker_busy = [False] * self.n_workers
        self.worker_job: list[tuple[int, int]] = [(0, 0)] * self.n_workers
        self.busy_n = 0
        self.rr = 0

        self.lb_state = [_LB_IDLE] * config.lb_cores

        self.heap: list[tuple[int, int, int, int]] = []
        self.seq = 0

        # totals
        self.arrivals = 0
        self.dropped = 0
        self.transmitted = 0
        self.arrived_bytes = 0
        self.tx_bits = 0
        self.shortage = 0
        self.worker_busy_ns = 0
        self.ddw_acc = self.ddw_hit = 0
        self.rx_acc = self.rx_hit = 0
        self.tx_acc = self.tx_hit = 0
        self.ddr_acc = self.ddr_hit = 0
        self.pcie_bytes = 0

        self.timeline: list[TimelineRow] = []
        self.snapshots: list[MetricsSnapshot] = []
        self.interval_ns = int(round(config.profile_interval * 1e9))
        self._last_tick_ns = 0
        self._mark = self._totals_mark()

    # -- event plumbing -----------------------------------------------------

    def _push(self, t_ns: int, code: int, arg: int) -> None:
        heapq.heappush(self.heap, (t_ns, self.seq, code, arg))
        self.seq += 1

    def _totals_mark(self) -> tuple:
        return (self.arrivals, self.dropped, self.tx_bits, self.ddw_acc, self.ddw_hit,
                self.rx_acc, self.rx_hit, self.tx_acc, self.tx_hit,
                self.pcie_bytes, self.cache.stats.dram_bytes_total,
                self.worker_busy_ns, self.transmitted)

    def _check_conservation(self) -> None:
        filled = self.nic_pos - self.lb_pos
        if not 0 <= filled <= self.D:
            raise InvariantViolation(f"descriptor ring occupancy {filled} outside [0, {self.D}]")
        free_side = len(self.queue) + self.busy_n + len(self.free)
        if free_side + self.D != self.RX_b:
            raise InvariantViolation(
                "mbuf conservation broken: "
                f"bound={self.D - filled} filled={filled} queue={len(self.queue)} "
                f"workers={self.busy_n} free={len(self.free)} != RX_b={self.RX_b}"
            )

    def mbuf_state_counts(self) -> dict[MbufState, int]:
        filled = self.nic_pos - self.lb_pos
        return {
            MbufState.BOUND_TO_DESCRIPTOR: self.D - filled,
            MbufState.FILLED_PENDING: filled,
            MbufState.IN_QUEUE: len(self.queue),
            MbufState.IN_WORKER: self.busy_n,
            MbufState.FREE_IN_RING: len(self.free),
        }

    # -- phase handlers -----------------------------------------------------

    def _span(self, mbuf: int, lines: int, kind: AccessKind) -> int:
        hits, _, _, _, _, _ = self.cache._dispatch(
            mbuf * self.stride_lines, lines, kind, None)
        return hits

    def _on_arrival(self, now: int, idx: int) -> None:
        size = self.arr_size[idx]
        self.arrivals += 1
        self.arrived_bytes += size
        # queue the next arrival before any LB wake-up so that same-instant
        # back-to-back packets contend for descriptors ahead of the poll
        nxt = idx + 1
        if nxt < len(self.arr_t_ns):
            self._push(self.arr_t_ns[nxt], _EV_ARRIVAL, nxt)
        if self.nic_pos - self.lb_pos == self.D:
            self.dropped += 1
            return
        slot = self.nic_pos % self.D
        lines = -(-size // self.line_bytes)
        hits = self._span(self.slot_mbuf[slot], lines, AccessKind.DDIO_WRITE)
        self.ddw_acc += lines
        self.ddw_hit += hits
        self.pcie_bytes += lines * self.line_bytes
        self.slot_size[slot] = size
        self.nic_pos += 1
        for li, st in enumerate(self.lb_state):
            if st == _LB_IDLE:
                self.lb_state[li] = _LB_RUN
                self._push(now, _EV_LB, li)

    def _on_lb(self, now: int, li: int) -> None:
        tm = self.cfg.timing
        consumed = 0
        cost = 0
        blocked = 0
        while consumed < tm.poll_batch and self.lb_pos < self.nic_pos:
            if not self.free:
                blocked = _LB_BLOCK_MBUF
                break
            if len(self.queue) >= self.qcap:
                blocked = _LB_BLOCK_QUEUE
                break
            slot = self.lb_pos % self.D
            mbuf = self.slot_mbuf[slot]
            size = self.slot_size[slot]
            lines = -(-size // self.line_bytes)
            hits = self._span(mbuf, lines, AccessKind.CORE_READ)
            self.rx_acc += lines
            self.rx_hit += hits
            cost += hits * tm.llc_hit_ns + (lines - hits) * tm.dram_access_ns
            fresh = self.free.popleft()
            hdr = self._span(fresh, 1, AccessKind.CORE_READ)  # mbuf metadata touch
            self.rx_acc += 1
            self.rx_hit += hdr
            cost += tm.llc_hit_ns if hdr else tm.dram_access_ns
            self.slot_mbuf[slot] = fresh
            self.lb_pos += 1
            self.queue.append((mbuf, size))
            self._feed_workers(now)
            consumed += 1
        if consumed:
            self.lb_state[li] = _LB_RUN
            self._push(now + max(cost, 1), _EV_LB, li)
        elif blocked == _LB_BLOCK_MBUF:
            self.lb_state[li] = _LB_BLOCK_MBUF
            self.shortage += 1
        elif blocked == _LB_BLOCK_QUEUE:
            self.lb_state[li] = _LB_BLOCK_QUEUE
        else:
            self.lb_state[li] = _LB_IDLE

    def _feed_workers(self, now: int) -> None:
        while self.queue and self.busy_n < self.n_workers:
            wid = self.rr
            while self.worker_busy[wid]:
                wid = (wid + 1) % self.n_workers
            self.rr = (wid + 1) % self.n_workers
            self._start_worker(now, wid, *self.queue.popleft())

    def _start_worker(self, now: int, wid: int, mbuf: int, size: int) -> None:
        tm = self.cfg.timing
        lines = -(-size // self.line_bytes)
        h_read = self._span(mbuf, lines, AccessKind.CORE_READ)
        h_write = self._span(mbuf, lines, AccessKind.CORE_WRITE)
        self.tx_acc += 2 * lines
        self.tx_hit += h_read + h_write
        cost = (h_read + h_write) * tm.llc_hit_ns \
            + (2 * lines - h_read - h_write) * tm.dram_access_ns
        h_tx = self._span(mbuf, lines, AccessKind.DDIO_READ)
        self.ddr_acc += lines
        self.ddr_hit += h_tx
        self.pcie_bytes += lines * self.line_bytes
        cost += h_tx * tm.llc_hit_ns + (lines - h_tx) * tm.dram_access_ns
        cost += tm.per_packet_proc_ns
        self.worker_busy[wid] = True
        self.worker_job[wid] = (mbuf, size)
        self.busy_n += 1
        self.worker_busy_ns += cost
        self._push(now + cost, _EV_WORKER, wid)

    def _on_worker_done(self, now: int, wid: int) -> None:
        mbuf, size = self.worker_job[wid]
        self.worker_busy[wid] = False
        self.busy_n -= 1
        self.free.append(mbuf)
        self.transmitted += 1
        self.tx_bits += size * 8
        for li, st in enumerate(self.lb_state):
            if st == _LB_BLOCK_MBUF:
                self.lb_state[li] = _LB_RUN
                self._push(now, _EV_LB, li)
        self._feed_workers(now)

    # -- profiling ----------------------------------------------------------

    def _interval_counters(self, window_s: float) -> IntervalCounters:
        (a0, d0, b0, dw0, dwh0, rx0, rxh0, tx0, txh0, pc0, dr0, wb0, tr0) = self._mark
        return IntervalCounters(
            ddio_writes=self.ddw_acc - dw0,
            ddio_write_misses=(self.ddw_acc - dw0) - (self.ddw_hit - dwh0),
            core_accesses=(self.rx_acc - rx0) + (self.tx_acc - tx0),
            core_misses=(self.rx_acc - rx0) - (self.rx_hit - rxh0)
            + (self.tx_acc - tx0) - (self.tx_hit - txh0),
            dram_bytes=self.cache.stats.dram_bytes_total - dr0,
            pcie_bytes=self.pcie_bytes - pc0,
            tx_bits=self.tx_bits - b0,
            worker_busy_ns=self.worker_busy_ns - wb0,
            worker_count=self.n_workers,
        )

    def _emit_interval(self, now_ns: int) -> None:
        window_ns = now_ns - self._last_tick_ns
        if window_ns <= 0:
            return
        window = window_ns / 1e9
        t = now_ns / 1e9
        cnt = self._interval_counters(window)
        snap = make_snapshot(cnt, t, window)
        self.snapshots.append(snap)
        (a0, d0, *_rest) = self._mark
        arr_delta = self.arrivals - a0
        drop_delta = self.dropped - d0
        rx_d = (self.rx_acc - self._mark[5], self.rx_hit - self._mark[6])
        tx_d = (self.tx_acc - self._mark[7], self.tx_hit - self._mark[8])
        self.timeline.append(TimelineRow(
            t=t,
            throughput_bps=snap.throughput_bps,
            loss_rate=drop_delta / arr_delta if arr_delta else 0.0,
            ddio_write_miss_rate=snap.ddio_write_miss_rate,
            rx_llc_miss_rate=(rx_d[0] - rx_d[1]) / rx_d[0] if rx_d[0] else 0.0,
            tx_llc_miss_rate=(tx_d[0] - tx_d[1]) / tx_d[0] if tx_d[0] else 0.0,
            dram_Bps=snap.dram_bandwidth,
            pcie_Bps=snap.pcie_bandwidth,
            ddio_ways=self.cache.ddio_ways,
        ))
        if self.controller is not None:
            self.controller(snap, self.cache.ddio_ways, self._resize)
        self._last_tick_ns = now_ns
        self._mark = self._totals_mark()

    def _resize(self, new_ways: int) -> bool:
        try:
            self.cache.resize_ddio_ways(new_ways)
            return True
        except CacheModelError:
            return False

    def _work_pending(self) -> bool:
        if self.nic_pos > self.lb_pos or self.queue or self.busy_n:
            return True
        return any(st != _LB_IDLE for st in self.lb_state)

    def _on_tick(self, now: int) -> None:
        self._emit_interval(now)
        if self.heap or self._work_pending():
            self._push(now + self.interval_ns, _EV_TICK, 0)

    # -- main loop ----------------------------------------------------------

    def run(self) -> SimResult:
        if self.arr_t_ns:
            self._push(self.arr_t_ns[0], _EV_ARRIVAL, 0)
        self._push(self.interval_ns, _EV_TICK, 0)
        last_t = 0
        heap = self.heap
        while heap:
            t, _, code, arg = heapq.heappop(heap)
            last_t = t
            if code == _EV_ARRIVAL:
                self._on_arrival(t, arg)
            elif code == _EV_LB:
                if self.lb_state[arg] == _LB_RUN:
                    self._on_lb(t, arg)
            elif code == _EV_WORKER:
                self._on_worker_done(t, arg)
            else:
                self._on_tick(t)
                continue
            self._check_conservation()
        self._emit_interval(last_t)

        in_flight = (self.nic_pos - self.lb_pos) + len(self.queue) + self.busy_n
        if self.arrivals != self.transmitted + self.dropped + in_flight:
            raise InvariantViolation(
                f"packet accounting broken: {self.arrivals} arrivals != "
                f"{self.transmitted} tx + {self.dropped} dropped + {in_flight} in flight"
            )
        if in_flight:
            raise InvariantViolation(f"{in_flight} packets stuck in flight after drain")

        duration = self.duration
        offered = self.arrived_bytes * 8 / duration
        throughput = self.tx_bits / duration
        result = SimResult(
            throughput_bps=throughput,
            offered_load_bps=offered,
            packet_loss_rate=self.dropped / self.arrivals if self.arrivals else 0.0,
            ddio_write_miss_rate=1 - self.ddw_hit / self.ddw_acc if self.ddw_acc else 0.0,
            rx_llc_miss_rate=1 - self.rx_hit / self.rx_acc if self.rx_acc else 0.0,
            tx_llc_miss_rate=1 - self.tx_hit / self.tx_acc if self.tx_acc else 0.0,
            dram_bytes_per_second=self.cache.stats.dram_bytes_total / duration,
            mbuf_shortage_events=self.shortage,
            arrivals=self.arrivals,
            transmitted=self.transmitted,
            dropped=self.dropped,
            duration=duration,
            final_ddio_ways=self.cache.ddio_ways,
            timeline=self.timeline,
        )
        if result.throughput_bps > result.offered_load_bps + 1e-6:
            raise InvariantViolation("throughput exceeded offered load")
        for name in ("packet_loss_rate", "ddio_write_miss_rate",
                     "rx_llc_miss_rate", "tx_llc_miss_rate"):
            v = getattr(result, name)
            if not 0.0 <= v <= 1.0:
                raise InvariantViolation(f"{name}={v} outside [0, 1]")
        return result


def run(profile: TrafficProfile, config: PipelineConfig,
        controller: Controller | None = None,
        packets: list[Packet] | None = None) -> SimResult:
    """Simulate one traffic stream through the pipeline.

    Deterministic for a fixed (profile, config) pair; the optional
    controller hook is invoked once per profiling interval and may resize
    the DDIO way partition through the provided callback.
    """
    config.validate()
    profile.validate()
    if packets is None:
        packets = generate(profile)
    sim = _Simulation(packets, config, controller, profile.duration)
    return sim.run()
