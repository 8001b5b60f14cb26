"""Artifact writers: run manifests, CSV tables, JSON reports, plot stub.

Every writer is deterministic: stable key order, repr-formatted floats, no
timestamps.  A run directory always contains manifest.json with the full
resolved parameter set, which is sufficient to reproduce every other file
in the directory bit for bit.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .allocator import AdjustmentRecord, ActionKind
from .configurator import OfflineSearchReport, Selection, SweepRecord
from .pipeline import SimResult, TimelineRow

TIMELINE_HEADER = ["t", "throughput_bps", "loss_rate", "ddio_write_miss_rate",
                   "rx_llc_miss_rate", "tx_llc_miss_rate", "dram_Bps", "pcie_Bps",
                   "ddio_ways"]
SWEEP_HEADER = ["candidate", "throughput_bps", "loss_rate", "ddio_write_miss_rate",
                "rx_llc_miss", "tx_llc_miss", "dram_Bps"]
ADJUSTMENT_HEADER = ["t", "state", "action", "ddio_ways"]


@dataclass(frozen=True)
class RunManifest:
    subcommand: str
    seed: int
    out_dir: str
    tool_version: str
    config_path: str | None
    resolved: dict

    def to_dict(self) -> dict:
        return {
            "subcommand": self.subcommand,
            "seed": self.seed,
            "out_dir": self.out_dir,
            "tool_version": self.tool_version,
            "config_path": self.config_path,
            "resolved": self.resolved,
        }


def write_json(path: str | Path, obj: dict) -> None:
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


def write_manifest(out_dir: str | Path, manifest: RunManifest) -> Path:
    path = Path(out_dir) / "manifest.json"
    write_json(path, manifest.to_dict())
    return path


def _fmt(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def write_timeline_csv(path: str | Path, rows: Iterable[TimelineRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TIMELINE_HEADER)
        for r in rows:
            w.writerow([_fmt(v) for v in (
                r.t, r.throughput_bps, r.loss_rate, r.ddio_write_miss_rate,
                r.rx_llc_miss_rate, r.tx_llc_miss_rate, r.dram_Bps, r.pcie_Bps,
                r.ddio_ways)])


def write_sweep_csv(path: str | Path, records: Iterable[SweepRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_HEADER)
        for r in records:
            w.writerow([_fmt(v) for v in (
                r.candidate, r.throughput_bps, r.loss_rate, r.ddio_write_miss_rate,
                r.rx_llc_miss_rate, r.tx_llc_miss_rate, r.dram_bytes_per_second)])


def _fmt_action(a) -> str:
    if a.kind is ActionKind.HOLD:
        return "hold"
    return f"{a.kind.value}({a.step})"


def write_adjustment_log(path: str | Path, records: Iterable[AdjustmentRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ADJUSTMENT_HEADER)
        for r in records:
            w.writerow([_fmt(r.t), r.state.value, _fmt_action(r.action), r.ddio_ways])


def sim_result_dict(result: SimResult) -> dict:
    return result.to_dict(with_timeline=False)


def selection_dict(sel: Selection) -> dict:
    return {
        "chosen": sel.chosen,
        "feasible": list(sel.feasible),
        "rationale": sel.rationale,
        "constraint_met": sel.constraint_met,
    }


def search_report_dict(report: OfflineSearchReport) -> dict:
    return {
        "chosen_descriptors": report.chosen_descriptors,
        "chosen_buffer": report.chosen_buffer,
        "descriptor_selection": selection_dict(report.descriptor_selection),
        "buffer_selection": selection_dict(report.buffer_selection),
    }


PLOT_STUB = """\
#!/usr/bin/env python3
\"\"\"Generic plotting stub for upfcachesim CSV artifacts.

Usage: python plot.py <file.csv> [x_column] [y_column ...]
Plots the named columns (default: every numeric column) against the first
column.  Requires matplotlib, which is intentionally not a dependency of
the simulator itself.
\"\"\"
import csv
import sys


def main() -> int:
    if len(sys.argv) < 2:
        print(__doc__)
        return 1
    import matplotlib.pyplot as plt

    path = sys.argv[1]
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        print("empty csv")
        return 1
    cols = list(rows[0])
    x = sys.argv[2] if len(sys.argv) > 2 else cols[0]
    ys = sys.argv[3:] or [c for c in cols[1:] if c != x]
    xs = [float(r[x]) for r in rows]
    for y in ys:
        try:
            plt.plot(xs, [float(r[y]) for r in rows], marker="o", label=y)
        except ValueError:
            continue
    plt.xlabel(x)
    plt.legend()
    plt.tight_layout()
    out = path.rsplit(".", 1)[0] + ".png"
    plt.savefig(out, dpi=150)
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
"""


def write_plot_stub(out_dir: str | Path) -> None:
    (Path(out_dir) / "plot.py").write_text(PLOT_STUB)
