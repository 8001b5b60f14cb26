"""Offline search for descriptor count and RX buffer size.

The search sweeps one axis at a time (descriptors first, then buffer size
with the chosen descriptor count fixed), averages each candidate over
repetitions with a candidate-independent seed schedule, and then picks the
highest-throughput candidate whose packet loss stays under the loss
threshold.  Ties go to the smaller resource value; candidates that violate
pipeline invariants are recorded as infeasible rather than skipped.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

from .errors import ConfigError
from .pipeline import PipelineConfig, run
from .traffic import TrafficProfile


class SweepAxis(Enum):
    DESCRIPTORS = "descriptors"
    BUFFER_SIZE = "buffer_size"


@dataclass(frozen=True)
class SearchSpace:
    descriptor_candidates: tuple[int, ...] = (128, 256, 512, 1024, 2048, 4096)
    buffer_candidates: tuple[int, ...] = (8192, 16384, 32768, 65536, 131072, 262140)
    loss_threshold: float = 0.01

    def validate(self) -> None:
        for name, cands in (("descriptor_candidates", self.descriptor_candidates),
                            ("buffer_candidates", self.buffer_candidates)):
            if not cands:
                raise ConfigError(f"search.{name} must not be empty")
            if any(b <= a for a, b in zip(cands, cands[1:])):
                raise ConfigError(f"search.{name} must be strictly increasing")
        if not 0.0 < self.loss_threshold < 1.0:
            raise ConfigError("search.loss_threshold must be in (0, 1)")


@dataclass
class SweepRecord:
    candidate: int
    throughput_bps: float = 0.0
    loss_rate: float = 1.0
    ddio_write_miss_rate: float = 0.0
    rx_llc_miss_rate: float = 0.0
    tx_llc_miss_rate: float = 0.0
    dram_bytes_per_second: float = 0.0
    mbuf_shortage_events: float = 0.0
    repetitions: int = 0
    feasible_config: bool = True
    note: str = ""


@dataclass(frozen=True)
class Selection:
    chosen: int
    feasible: tuple[int, ...]
    rationale: str
    constraint_met: bool


def _cell_config(axis: SweepAxis, base: PipelineConfig, candidate: int) -> PipelineConfig:
    if axis is SweepAxis.DESCRIPTORS:
        return replace(base, descriptor_count=candidate)
    return replace(base, mbuf_ring_size=candidate)


def _run_cell(args) -> dict:
    axis, candidate, base_config, profile, seed = args
    cfg = _cell_config(axis, base_config, candidate)
    result = run(replace(profile, seed=seed), cfg)
    return {
        "throughput_bps": result.throughput_bps,
        "loss_rate": result.packet_loss_rate,
        "ddio_write_miss_rate": result.ddio_write_miss_rate,
        "rx_llc_miss_rate": result.rx_llc_miss_rate,
        "tx_llc_miss_rate": result.tx_llc_miss_rate,
        "dram_bytes_per_second": result.dram_bytes_per_second,
        "mbuf_shortage_events": result.mbuf_shortage_events,
    }


def sweep(axis: SweepAxis, space: SearchSpace, base_config: PipelineConfig,
          profile: TrafficProfile, repetitions: int = 1, jobs: int = 1) -> list[SweepRecord]:
    """One simulation per (candidate, repetition); records averaged per candidate.

    Repetition r of every candidate runs with seed profile.seed + r, so all
    candidates face identical traffic.
    """
    if repetitions < 1:
        raise ConfigError("sweep repetitions must be >= 1")
    space.validate()
    candidates = (space.descriptor_candidates if axis is SweepAxis.DESCRIPTORS
                  else space.buffer_candidates)
    records: list[SweepRecord] = []
    cells: list[tuple] = []
    cell_owner: list[int] = []
    for cand in candidates:
        cfg = _cell_config(axis, base_config, cand)
        try:
            cfg.validate()
        except ConfigError as exc:
            records.append(SweepRecord(candidate=cand, feasible_config=False, note=str(exc)))
            continue
        rec = SweepRecord(candidate=cand, repetitions=repetitions)
        records.append(rec)
        for r in range(repetitions):
            cells.append((axis, cand, base_config, profile, profile.seed + r))
            cell_owner.append(len(records) - 1)

    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_cell, cells))
    else:
        outcomes = [_run_cell(c) for c in cells]

    sums: dict[int, dict] = {}
    for idx, out in zip(cell_owner, outcomes):
        acc = sums.setdefault(idx, {k: 0.0 for k in out})
        for k, v in out.items():
            acc[k] += v
    for idx, acc in sums.items():
        rec = records[idx]
        n = rec.repetitions
        rec.throughput_bps = acc["throughput_bps"] / n
        rec.loss_rate = acc["loss_rate"] / n
        rec.ddio_write_miss_rate = acc["ddio_write_miss_rate"] / n
        rec.rx_llc_miss_rate = acc["rx_llc_miss_rate"] / n
        rec.tx_llc_miss_rate = acc["tx_llc_miss_rate"] / n
        rec.dram_bytes_per_second = acc["dram_bytes_per_second"] / n
        rec.mbuf_shortage_events = acc["mbuf_shortage_events"] / n
    return records


def select(records: list[SweepRecord], loss_threshold: float) -> Selection:
    """Loss-constrained throughput maximization over a sweep table.

    Output is invariant under row permutation; never returns an infeasible
    candidate while a feasible one exists.
    """
    if not records:
        raise ConfigError("select: empty sweep table")
    valid = [r for r in records if r.feasible_config]
    if not valid:
        raise ConfigError("select: no candidate produced a valid configuration")
    feasible = [r for r in valid if r.loss_rate <= loss_threshold]
    if feasible:
        best = min(feasible, key=lambda r: (-r.throughput_bps, r.candidate))
        rejected = [r for r in valid
                    if r.loss_rate > loss_threshold and r.throughput_bps > best.throughput_bps]
        why = (f"highest throughput ({best.throughput_bps:.3e} bps) with loss "
               f"{best.loss_rate:.4f} <= {loss_threshold}")
        if rejected:
            names = ", ".join(
                f"{r.candidate} ({r.throughput_bps:.3e} bps @ {r.loss_rate:.4f} loss)"
                for r in sorted(rejected, key=lambda r: r.candidate))
            why += f"; rejected faster but lossy candidates: {names}"
        return Selection(
            chosen=best.candidate,
            feasible=tuple(sorted(r.candidate for r in feasible)),
            rationale=why,
            constraint_met=True,
        )
    best = min(valid, key=lambda r: (r.loss_rate, r.candidate))
    return Selection(
        chosen=best.candidate,
        feasible=(),
        rationale=(f"no candidate met loss <= {loss_threshold}; "
                   f"fell back to minimal loss {best.loss_rate:.4f} at {best.candidate}"),
        constraint_met=False,
    )


@dataclass
class OfflineSearchReport:
    descriptor_records: list[SweepRecord]
    descriptor_selection: Selection
    buffer_records: list[SweepRecord]
    buffer_selection: Selection

    @property
    def chosen_descriptors(self) -> int:
        return self.descriptor_selection.chosen

    @property
    def chosen_buffer(self) -> int:
        return self.buffer_selection.chosen


def full_offline_search(space: SearchSpace, base_config: PipelineConfig,
                        profile: TrafficProfile, repetitions: int = 1,
                        jobs: int = 1) -> OfflineSearchReport:
    """Coordinate search: descriptor sweep first, then buffer sweep at the chosen D."""
    d_records = sweep(SweepAxis.DESCRIPTORS, space, base_config, profile, repetitions, jobs)
    d_sel = select(d_records, space.loss_threshold)
    fixed = replace(base_config, descriptor_count=d_sel.chosen)
    b_records = sweep(SweepAxis.BUFFER_SIZE, space, fixed, profile, repetitions, jobs)
    b_sel = select(b_records, space.loss_threshold)
    return OfflineSearchReport(d_records, d_sel, b_records, b_sel)


@dataclass
class GridCell:
    descriptors: int
    buffer_size: int
    record: SweepRecord


def full_grid_search(space: SearchSpace, base_config: PipelineConfig,
                     profile: TrafficProfile, repetitions: int = 1,
                     jobs: int = 1) -> tuple[list[GridCell], GridCell]:
    """Exhaustive 2-D sweep for study; returns all cells and the loss-feasible best."""
    space.validate()
    cells: list[GridCell] = []
    for d in space.descriptor_candidates:
        base_d = replace(base_config, descriptor_count=d)
        sub = SearchSpace(buffer_candidates=space.buffer_candidates,
                          descriptor_candidates=(d,),
                          loss_threshold=space.loss_threshold)
        for rec in sweep(SweepAxis.BUFFER_SIZE, sub, base_d, profile, repetitions, jobs):
            cells.append(GridCell(d, rec.candidate, rec))
    ok = [c for c in cells if c.record.feasible_config
          and c.record.loss_rate <= space.loss_threshold]
    pool = ok or [c for c in cells if c.record.feasible_config]
    if not pool:
        raise ConfigError("grid search: no valid cell")
    best = min(pool, key=lambda c: (-c.record.throughput_bps, c.descriptors, c.buffer_size))
    return cells, best
