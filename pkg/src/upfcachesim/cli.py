"""Command-line entry point.

Subcommands map to the experiments the simulator reproduces: `simulate`
runs one configuration, `sweep-descriptors` and `sweep-buffer` drive the
offline configurator axes, `sweep-ddio` scans isolated DDIO way counts,
`tune` chains the full offline search with an online allocator run, and
`analytic` evaluates the closed-form leakage model.

Exit codes: 0 success, 1 configuration/usage error (diagnostic names the
offending field), 2 internal invariant violation.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .allocator import AllocatorConfig, OnlineAllocator
from .cache import PartitionMode, PartitionPolicy
from .config import ResolvedConfig, load
from .configurator import (
    SearchSpace,
    SweepAxis,
    SweepRecord,
    full_grid_search,
    full_offline_search,
    select,
    sweep,
)
from .errors import ConfigError, InvariantViolation
from .leakage import (
    concentration_bound,
    descriptor_footprint,
    empty_bin_fraction,
    expected_leakage,
    leakage_ratio,
    monte_carlo_leakage,
)
from .pipeline import PipelineConfig, run
from .report import (
    RunManifest,
    search_report_dict,
    selection_dict,
    sim_result_dict,
    write_adjustment_log,
    write_json,
    write_manifest,
    write_plot_stub,
    write_sweep_csv,
    write_timeline_csv,
)
from .traffic import FixedSize, TrafficProfile, generate, write_csv as write_traffic_csv

SEED_ENV = "UPFCACHESIM_SEED"


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 (not 2) on usage errors, per the CLI contract."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    p = _Parser(prog="upfcachesim",
                description="UPF data-path cache simulator and configurator")
    p.add_argument("--version", action="version", version=f"upfcachesim {__version__}")
    subs = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    def common(sp, jobs=False, reps=False):
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--out", help="artifact output directory")
        sp.add_argument("--seed", type=int,
                        help=f"traffic seed (default: ${SEED_ENV} or config)")
        if jobs:
            sp.add_argument("--jobs", type=int, default=1,
                            help="parallel sweep workers (default 1)")
        if reps:
            sp.add_argument("--reps", type=int, default=1,
                            help="repetitions per candidate (default 1)")

    sim = subs.add_parser("simulate", help="run one pipeline simulation")
    common(sim)
    sim.add_argument("--duration", type=float, help="override traffic duration (s)")
    sim.add_argument("--rate", type=float, help="override offered rate (pps)")
    sim.add_argument("--packet-size", type=int, help="override fixed packet size (B)")
    sim.add_argument("--descriptors", type=int, help="override descriptor count")
    sim.add_argument("--buffer-size", type=int, help="override mbuf ring size")
    sim.add_argument("--ddio-ways", type=int, help="override DDIO way count")
    sim.add_argument("--mode", choices=["shared", "isolated"], help="partition mode")
    sim.add_argument("--allocator", action="store_true",
                     help="attach the online DDIO-way allocator")
    sim.add_argument("--dump-traffic", metavar="CSV",
                     help="also dump the generated arrival stream")

    sd = subs.add_parser("sweep-descriptors", help="descriptor-count sweep + selection")
    common(sd, jobs=True, reps=True)
    sd.add_argument("--candidates", help="comma-separated candidate list")

    sb = subs.add_parser("sweep-buffer", help="RX buffer size sweep + selection")
    common(sb, jobs=True, reps=True)
    sb.add_argument("--candidates", help="comma-separated candidate list")

    sw = subs.add_parser("sweep-ddio", help="isolated DDIO way-count sweep")
    common(sw, jobs=True, reps=True)
    sw.add_argument("--ways", default="2..8", help="way range A..B or comma list")
    sw.add_argument("--packet-size", type=int, help="fixed packet size for the sweep (B)")

    tn = subs.add_parser("tune", help="full offline search, then online allocator run")
    common(tn, jobs=True, reps=True)
    tn.add_argument("--grid", action="store_true",
                    help="also run the exhaustive 2-D grid for comparison")

    an = subs.add_parser("analytic", help="closed-form DMA leakage evaluation")
    an.add_argument("--n", type=int, help="in-flight cache lines (balls)")
    an.add_argument("--m", type=int, help="DDIO cache lines (bins)")
    an.add_argument("--descriptors", type=int, default=4096,
                    help="derive n from a descriptor ring (default 4096)")
    an.add_argument("--packet-size", type=int, default=1500)
    an.add_argument("--line-bytes", type=int, default=64)
    an.add_argument("--ddio-bytes", type=int, default=6 * 1024 * 1024,
                    help="derive m from the DDIO partition size (default 6 MiB)")
    an.add_argument("--epsilon", type=float, help="also print the concentration bound")
    an.add_argument("--trials", type=int, help="also run a Monte Carlo cross-check")
    an.add_argument("--seed", type=int, help="Monte Carlo seed")
    an.add_argument("--out", help="artifact output directory")
    return p


def _resolve_seed(args, cfg: ResolvedConfig) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"${SEED_ENV} must be an integer, got {env!r}") from exc
    return cfg.traffic.seed


def _load(args) -> tuple[ResolvedConfig, int]:
    cfg = load(getattr(args, "config", None))
    seed = _resolve_seed(args, cfg)
    cfg.traffic = replace(cfg.traffic, seed=seed)
    return cfg, seed


def _out_dir(args) -> Path | None:
    out = getattr(args, "out", None)
    if out is None:
        return None
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _manifest(args, seed: int, cfg: ResolvedConfig | None, extra: dict) -> RunManifest:
    return RunManifest(
        subcommand=args.cmd,
        seed=seed,
        out_dir=str(getattr(args, "out", None) or ""),
        tool_version=__version__,
        config_path=getattr(args, "config", None),
        resolved={"config": cfg.describe() if cfg else None, "args": extra},
    )


def _emit(obj: dict) -> None:
    print(json.dumps(obj, indent=2))


def _parse_candidates(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"--candidates: {exc}") from exc


def _parse_ways(text: str) -> tuple[int, ...]:
    try:
        if ".." in text:
            lo, hi = text.split("..")
            return tuple(range(int(lo), int(hi) + 1))
        return tuple(int(x) for x in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"--ways: expected A..B or a comma list ({exc})") from exc


def _cmd_simulate(args) -> int:
    cfg, seed = _load(args)
    pl = cfg.pipeline
    tr = cfg.traffic
    if args.duration is not None:
        tr = replace(tr, duration=args.duration)
    if args.rate is not None:
        tr = replace(tr, offered_rate=args.rate)
    if args.packet_size is not None:
        tr = replace(tr, size_model=FixedSize(args.packet_size))
    if args.descriptors is not None:
        pl = replace(pl, descriptor_count=args.descriptors)
    if args.buffer_size is not None:
        pl = replace(pl, mbuf_ring_size=args.buffer_size)
    if args.mode is not None or args.ddio_ways is not None:
        mode = PartitionMode(args.mode) if args.mode else pl.partition.mode
        ways = args.ddio_ways if args.ddio_ways is not None else pl.partition.ddio_ways
        pl = replace(pl, partition=PartitionPolicy(mode=mode, ddio_ways=ways))
    cfg.pipeline, cfg.traffic = pl, tr

    alloc = None
    controller = None
    if args.allocator:
        cfg.allocator.validate(pl.geometry.ways)
        alloc = OnlineAllocator(cfg.allocator)
        controller = alloc.hook()

    result = run(tr, pl, controller=controller)
    out = _out_dir(args)
    payload = sim_result_dict(result)
    _emit(payload)
    if out is not None:
        write_json(out / "result.json", payload)
        write_timeline_csv(out / "timeline.csv", result.timeline)
        if alloc is not None:
            write_adjustment_log(out / "adjustment_log.csv", alloc.log)
        if args.dump_traffic:
            write_traffic_csv(generate(tr), args.dump_traffic)
        write_plot_stub(out)
        write_manifest(out, _manifest(args, seed, cfg, {
            "duration": tr.duration, "allocator": bool(args.allocator)}))
    return 0


def _axis_sweep(args, axis: SweepAxis) -> int:
    cfg, seed = _load(args)
    space = cfg.search
    if args.candidates:
        cands = _parse_candidates(args.candidates)
        if axis is SweepAxis.DESCRIPTORS:
            space = replace(space, descriptor_candidates=cands)
        else:
            space = replace(space, buffer_candidates=cands)
    records = sweep(axis, space, cfg.pipeline, cfg.traffic,
                    repetitions=args.reps, jobs=args.jobs)
    sel = select(records, space.loss_threshold)
    payload = {
        "axis": axis.value,
        "selection": selection_dict(sel),
        "records": [vars(r) for r in records],
    }
    _emit(payload)
    out = _out_dir(args)
    if out is not None:
        write_sweep_csv(out / "sweep.csv", records)
        write_json(out / "selection.json", payload)
        write_plot_stub(out)
        write_manifest(out, _manifest(args, seed, cfg, {
            "axis": axis.value, "reps": args.reps,
            "candidates": list(space.descriptor_candidates if axis is SweepAxis.DESCRIPTORS
                               else space.buffer_candidates)}))
    return 0


def _avg_ddio_run(pl: PipelineConfig, tr: TrafficProfile, ways: int, reps: int) -> SweepRecord:
    part = PartitionPolicy(mode=PartitionMode.ISOLATED, ddio_ways=ways)
    cfg = replace(pl, partition=part)
    cfg.validate()
    rec = SweepRecord(candidate=ways, repetitions=reps)
    acc = [0.0] * 6
    for r in range(reps):
        res = run(replace(tr, seed=tr.seed + r), cfg)
        acc[0] += res.throughput_bps
        acc[1] += res.packet_loss_rate
        acc[2] += res.ddio_write_miss_rate
        acc[3] += res.rx_llc_miss_rate
        acc[4] += res.tx_llc_miss_rate
        acc[5] += res.dram_bytes_per_second
    rec.throughput_bps = acc[0] / reps
    rec.loss_rate = acc[1] / reps
    rec.ddio_write_miss_rate = acc[2] / reps
    rec.rx_llc_miss_rate = acc[3] / reps
    rec.tx_llc_miss_rate = acc[4] / reps
    rec.dram_bytes_per_second = acc[5] / reps
    return rec


def _cmd_sweep_ddio(args) -> int:
    cfg, seed = _load(args)
    ways = _parse_ways(args.ways)
    if not ways:
        raise ConfigError("--ways: empty range")
    tr = cfg.traffic
    if args.packet_size is not None:
        tr = replace(tr, size_model=FixedSize(args.packet_size))
    records = [_avg_ddio_run(cfg.pipeline, tr, w, args.reps) for w in ways]
    best = min(records, key=lambda r: (-r.throughput_bps, r.candidate))
    payload = {
        "best_ways": best.candidate,
        "best_throughput_bps": best.throughput_bps,
        "records": [vars(r) for r in records],
    }
    _emit(payload)
    out = _out_dir(args)
    if out is not None:
        write_sweep_csv(out / "sweep_ddio.csv", records)
        write_json(out / "ddio_selection.json", payload)
        write_plot_stub(out)
        write_manifest(out, _manifest(args, seed, cfg, {
            "ways": list(ways), "reps": args.reps,
            "packet_size": args.packet_size}))
    return 0


def _cmd_tune(args) -> int:
    cfg, seed = _load(args)
    cfg.allocator.validate(cfg.pipeline.geometry.ways)
    report = full_offline_search(cfg.search, cfg.pipeline, cfg.traffic,
                                 repetitions=args.reps, jobs=args.jobs)
    tuned = replace(cfg.pipeline,
                    descriptor_count=report.chosen_descriptors,
                    mbuf_ring_size=report.chosen_buffer)
    alloc = OnlineAllocator(cfg.allocator)
    result = run(cfg.traffic, tuned, controller=alloc.hook())
    payload = {
        "search": search_report_dict(report),
        "tuned_result": sim_result_dict(result),
    }
    grid_payload = None
    if args.grid:
        cells, best = full_grid_search(cfg.search, cfg.pipeline, cfg.traffic,
                                       repetitions=args.reps, jobs=args.jobs)
        grid_payload = {
            "best": {"descriptors": best.descriptors, "buffer_size": best.buffer_size,
                     "throughput_bps": best.record.throughput_bps},
            "cells": [{"descriptors": c.descriptors, "buffer_size": c.buffer_size,
                       "throughput_bps": c.record.throughput_bps,
                       "loss_rate": c.record.loss_rate} for c in cells],
        }
        payload["grid"] = grid_payload
    _emit(payload)
    out = _out_dir(args)
    if out is not None:
        write_sweep_csv(out / "descriptor_sweep.csv", report.descriptor_records)
        write_sweep_csv(out / "buffer_sweep.csv", report.buffer_records)
        write_json(out / "search_report.json", payload)
        write_timeline_csv(out / "timeline.csv", result.timeline)
        write_adjustment_log(out / "adjustment_log.csv", alloc.log)
        write_plot_stub(out)
        write_manifest(out, _manifest(args, seed, cfg, {
            "reps": args.reps, "grid": bool(args.grid)}))
    return 0


def _cmd_analytic(args) -> int:
    if (args.n is None) != (args.m is None):
        raise ConfigError("analytic: give both --n and --m, or neither")
    if args.n is not None:
        n, m = args.n, args.m
    else:
        n = descriptor_footprint(args.descriptors, args.packet_size, args.line_bytes)
        m = args.ddio_bytes // args.line_bytes
    payload: dict = {
        "n": n,
        "m": m,
        "expected_leakage": expected_leakage(n, m),
        "empty_bin_fraction": empty_bin_fraction(n, m),
    }
    if n >= 1:
        payload["leakage_ratio"] = leakage_ratio(n, m)
    if args.epsilon is not None:
        payload["concentration_bound"] = concentration_bound(
            m, args.epsilon, empty_bin_fraction(n, m))
    if args.trials is not None:
        seed = args.seed if args.seed is not None else int(os.environ.get(SEED_ENV, "1"))
        mc = monte_carlo_leakage(n, m, args.trials, seed)
        payload["monte_carlo"] = {"mean": mc.mean, "stderr": mc.stderr,
                                  "trials": mc.trials, "seed": seed}
    _emit(payload)
    out = _out_dir(args)
    if out is not None:
        write_json(out / "analytic.json", payload)
        write_manifest(out, _manifest(args, args.seed if args.seed is not None else 0,
                                      None, {"n": n, "m": m,
                                             "epsilon": args.epsilon,
                                             "trials": args.trials}))
    return 0


_DISPATCH = {
    "simulate": _cmd_simulate,
    "sweep-descriptors": lambda a: _axis_sweep(a, SweepAxis.DESCRIPTORS),
    "sweep-buffer": lambda a: _axis_sweep(a, SweepAxis.BUFFER_SIZE),
    "sweep-ddio": _cmd_sweep_ddio,
    "tune": _cmd_tune,
    "analytic": _cmd_analytic,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _DISPATCH[args.cmd](args)
    except InvariantViolation as exc:
        print(f"upfcachesim: invariant violation: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ValueError) as exc:
        print(f"upfcachesim: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
