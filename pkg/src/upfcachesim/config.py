"""Config-file loading for the CLI.

One JSON document with optional sections -- geometry, partition, pipeline,
traffic, profiler, allocator, search -- is the single source of truth for a
run; command-line flags override individual values.  Unknown sections or
fields are rejected with the offending name so typos never silently fall
back to defaults.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .allocator import AllocatorConfig
from .cache import CacheGeometry, CacheModelError, PartitionPolicy, PartitionMode
from .configurator import SearchSpace
from .errors import ConfigError
from .pipeline import PipelineConfig, TimingConfig
from .traffic import FixedSize, OnOffBurst, SizeMixture, TrafficProfile

_SECTIONS = ("geometry", "partition", "pipeline", "traffic", "profiler",
             "allocator", "search")


@dataclass
class ResolvedConfig:
    pipeline: PipelineConfig
    traffic: TrafficProfile
    allocator: AllocatorConfig
    search: SearchSpace
    eps_steady: float = 0.05

    def describe(self) -> dict:
        """JSON-serializable dump of every resolved parameter."""
        g = self.pipeline.geometry
        p = self.pipeline.partition
        t = self.pipeline.timing
        tr = self.traffic
        if isinstance(tr.size_model, FixedSize):
            size_model = {"fixed": tr.size_model.size}
        else:
            size_model = {"mixture": [[s, w] for s, w in tr.size_model.items]}
        burst = None
        if tr.burst is not None:
            burst = {"on_seconds": tr.burst.on_seconds,
                     "off_seconds": tr.burst.off_seconds,
                     "multiplier": tr.burst.multiplier}
        return {
            "geometry": {"total_bytes": g.total_bytes, "ways": g.ways,
                         "line_bytes": g.line_bytes},
            "partition": {"mode": p.mode.value, "ddio_ways": p.ddio_ways,
                          "core_ways": p.core_ways},
            "pipeline": {
                "descriptor_count": self.pipeline.descriptor_count,
                "mbuf_ring_size": self.pipeline.mbuf_ring_size,
                "mbuf_stride": self.pipeline.mbuf_stride,
                "queue_capacity": self.pipeline.queue_capacity,
                "lb_cores": self.pipeline.lb_cores,
                "worker_cores": self.pipeline.worker_cores,
                "nic_line_rate_bps": self.pipeline.nic_line_rate_bps,
                "timing": {"llc_hit_ns": t.llc_hit_ns,
                           "dram_access_ns": t.dram_access_ns,
                           "per_packet_proc_ns": t.per_packet_proc_ns,
                           "poll_batch": t.poll_batch},
            },
            "traffic": {"size_model": size_model, "offered_rate": tr.offered_rate,
                        "duration": tr.duration, "seed": tr.seed, "burst": burst},
            "profiler": {"interval": self.pipeline.profile_interval,
                         "eps_steady": self.eps_steady},
            "allocator": {
                "pcie_bw_thr": self.allocator.pcie_bw_thr,
                "eps_steady": self.allocator.eps_steady,
                "min_ddio_ways": self.allocator.min_ddio_ways,
                "max_ddio_ways": self.allocator.max_ddio_ways,
                "step": self.allocator.step,
            },
            "search": {
                "descriptor_candidates": list(self.search.descriptor_candidates),
                "buffer_candidates": list(self.search.buffer_candidates),
                "loss_threshold": self.search.loss_threshold,
            },
        }


def _take(section: dict, section_name: str, known: tuple[str, ...]) -> None:
    for key in section:
        if key not in known:
            raise ConfigError(f"{section_name}.{key}: unknown field")


def _get(section: dict, name: str, default, caster, field_name: str):
    if name not in section or section[name] is None:
        return default
    try:
        return caster(section[name])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{field_name}: {exc}") from exc


def load_raw(path: str | Path | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {p}: invalid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {p}: top level must be an object")
    for key in raw:
        if key not in _SECTIONS:
            raise ConfigError(f"{key}: unknown config section")
    return raw


def _build_geometry(raw: dict) -> CacheGeometry:
    sec = raw.get("geometry", {})
    _take(sec, "geometry", ("total_bytes", "ways", "line_bytes"))
    try:
        return CacheGeometry(
            total_bytes=_get(sec, "total_bytes", 33 * 1024 * 1024, int, "geometry.total_bytes"),
            ways=_get(sec, "ways", 11, int, "geometry.ways"),
            line_bytes=_get(sec, "line_bytes", 64, int, "geometry.line_bytes"),
        )
    except CacheModelError as exc:
        raise ConfigError(f"geometry: {exc}") from exc


def _build_partition(raw: dict) -> PartitionPolicy:
    sec = raw.get("partition", {})
    _take(sec, "partition", ("mode", "ddio_ways", "core_ways"))
    mode_s = _get(sec, "mode", "shared", str, "partition.mode")
    try:
        mode = PartitionMode(mode_s)
    except ValueError as exc:
        raise ConfigError(f"partition.mode: must be 'shared' or 'isolated', got {mode_s!r}") from exc
    core = sec.get("core_ways")
    return PartitionPolicy(
        mode=mode,
        ddio_ways=_get(sec, "ddio_ways", 2, int, "partition.ddio_ways"),
        core_ways=None if core is None else int(core),
    )


def _build_traffic(raw: dict) -> TrafficProfile:
    sec = raw.get("traffic", {})
    _take(sec, "traffic", ("size_model", "offered_rate", "duration", "seed", "burst"))
    sm = sec.get("size_model")
    if sm is None:
        size_model: FixedSize | SizeMixture = FixedSize(1500)
    elif isinstance(sm, dict) and "fixed" in sm:
        size_model = FixedSize(int(sm["fixed"]))
    elif isinstance(sm, dict) and "mixture" in sm:
        try:
            size_model = SizeMixture(tuple((int(s), float(w)) for s, w in sm["mixture"]))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"traffic.size_model.mixture: {exc}") from exc
    else:
        raise ConfigError("traffic.size_model: expected {'fixed': bytes} or {'mixture': [[bytes, weight], ...]}")
    burst_sec = sec.get("burst")
    burst = None
    if burst_sec is not None:
        _take(burst_sec, "traffic.burst", ("on_seconds", "off_seconds", "multiplier"))
        burst = OnOffBurst(
            on_seconds=_get(burst_sec, "on_seconds", 0.002, float, "traffic.burst.on_seconds"),
            off_seconds=_get(burst_sec, "off_seconds", 0.002, float, "traffic.burst.off_seconds"),
            multiplier=_get(burst_sec, "multiplier", 2.0, float, "traffic.burst.multiplier"),
        )
    return TrafficProfile(
        size_model=size_model,
        offered_rate=_get(sec, "offered_rate", 1_000_000.0, float, "traffic.offered_rate"),
        duration=_get(sec, "duration", 0.02, float, "traffic.duration"),
        seed=_get(sec, "seed", 1, int, "traffic.seed"),
        burst=burst,
    )


def resolve(raw: dict) -> ResolvedConfig:
    geometry = _build_geometry(raw)
    partition = _build_partition(raw)

    sec = raw.get("pipeline", {})
    _take(sec, "pipeline", ("descriptor_count", "mbuf_ring_size", "mbuf_stride",
                            "queue_capacity", "lb_cores", "worker_cores",
                            "nic_line_rate_bps", "timing"))
    tsec = sec.get("timing", {})
    _take(tsec, "pipeline.timing", ("llc_hit_ns", "dram_access_ns",
                                    "per_packet_proc_ns", "poll_batch"))
    timing = TimingConfig(
        llc_hit_ns=_get(tsec, "llc_hit_ns", 16, int, "pipeline.timing.llc_hit_ns"),
        dram_access_ns=_get(tsec, "dram_access_ns", 80, int, "pipeline.timing.dram_access_ns"),
        per_packet_proc_ns=_get(tsec, "per_packet_proc_ns", 300, int,
                                "pipeline.timing.per_packet_proc_ns"),
        poll_batch=_get(tsec, "poll_batch", 32, int, "pipeline.timing.poll_batch"),
    )

    psec = raw.get("profiler", {})
    _take(psec, "profiler", ("interval", "eps_steady"))
    interval = _get(psec, "interval", 0.01, float, "profiler.interval")
    eps_steady = _get(psec, "eps_steady", 0.05, float, "profiler.eps_steady")
    if interval <= 0:
        raise ConfigError("profiler.interval must be > 0")

    qcap = sec.get("queue_capacity")
    pipeline = PipelineConfig(
        descriptor_count=_get(sec, "descriptor_count", 4096, int, "pipeline.descriptor_count"),
        mbuf_ring_size=_get(sec, "mbuf_ring_size", 262140, int, "pipeline.mbuf_ring_size"),
        mbuf_stride=_get(sec, "mbuf_stride", 2048, int, "pipeline.mbuf_stride"),
        queue_capacity=None if qcap is None else int(qcap),
        lb_cores=_get(sec, "lb_cores", 1, int, "pipeline.lb_cores"),
        worker_cores=_get(sec, "worker_cores", 6, int, "pipeline.worker_cores"),
        timing=timing,
        partition=partition,
        geometry=geometry,
        profile_interval=interval,
        nic_line_rate_bps=_get(sec, "nic_line_rate_bps", 100e9, float,
                               "pipeline.nic_line_rate_bps"),
    )

    asec = raw.get("allocator", {})
    _take(asec, "allocator", ("pcie_bw_thr", "eps_steady", "min_ddio_ways",
                              "max_ddio_ways", "step"))
    allocator = AllocatorConfig(
        pcie_bw_thr=_get(asec, "pcie_bw_thr", 0.25 * pipeline.nic_line_rate_bps / 8,
                         float, "allocator.pcie_bw_thr"),
        eps_steady=_get(asec, "eps_steady", eps_steady, float, "allocator.eps_steady"),
        min_ddio_ways=_get(asec, "min_ddio_ways", 2, int, "allocator.min_ddio_ways"),
        max_ddio_ways=_get(asec, "max_ddio_ways", 8, int, "allocator.max_ddio_ways"),
        step=_get(asec, "step", 1, int, "allocator.step"),
    )

    ssec = raw.get("search", {})
    _take(ssec, "search", ("descriptor_candidates", "buffer_candidates", "loss_threshold"))
    defaults = SearchSpace()
    search = SearchSpace(
        descriptor_candidates=tuple(_get(ssec, "descriptor_candidates",
                                         defaults.descriptor_candidates,
                                         lambda v: tuple(int(x) for x in v),
                                         "search.descriptor_candidates")),
        buffer_candidates=tuple(_get(ssec, "buffer_candidates",
                                     defaults.buffer_candidates,
                                     lambda v: tuple(int(x) for x in v),
                                     "search.buffer_candidates")),
        loss_threshold=_get(ssec, "loss_threshold", 0.01, float, "search.loss_threshold"),
    )

    return ResolvedConfig(
        pipeline=pipeline,
        traffic=_build_traffic(raw),
        allocator=allocator,
        search=search,
        eps_steady=eps_steady,
    )


def load(path: str | Path | None) -> ResolvedConfig:
    return resolve(load_raw(path))
