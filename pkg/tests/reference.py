"""Brute-force reference models used as test oracles.

ReferenceCache mirrors the documented replacement contract with the most
literal data structures available: one dict of occupied ways and one
explicit recency list per set.  It shares no code or representation with
the array/kernel implementation it checks.
"""
from __future__ import annotations

KINDS = ("ddio_write", "ddio_read", "core_read", "core_write")
WRITE_KINDS = {"ddio_write", "core_write"}


class ReferenceCache:
    def __init__(self, sets: int, ways: int, ddio_ways: int, mode: str = "shared",
                 core_ways: int | None = None, line_bytes: int = 64):
        assert mode in ("shared", "isolated")
        self.sets = sets
        self.ways = ways
        self.d = ddio_ways
        self.mode = mode
        core = core_ways if core_ways is not None else ways - ddio_ways
        self.core = ways if mode == "shared" else core
        self.others = 0 if mode == "shared" else ways - ddio_ways - core
        self.line_bytes = line_bytes
        # way -> [line, dirty]
        self.slot: list[dict[int, list]] = [dict() for _ in range(sets)]
        # line ids, least recently used first
        self.recency: list[list[int]] = [[] for _ in range(sets)]

    def window(self, kind: str) -> list[int] | None:
        if kind == "ddio_write":
            return list(range(0, self.d))
        if kind == "ddio_read":
            return None
        if self.mode == "shared":
            return list(range(0, self.ways))
        return list(range(self.d, self.d + self.core))

    def resize(self, new_d: int) -> None:
        if self.mode == "shared":
            assert 1 <= new_d <= self.ways
            self.d = new_d
            return
        new_core = self.ways - self.others - new_d
        assert new_d >= 1 and new_core >= 1
        self.d = new_d
        self.core = new_core

    def access(self, line: int, kind: str) -> dict:
        s = line % self.sets
        slot = self.slot[s]
        rec = self.recency[s]
        write = kind in WRITE_KINDS
        for w, entry in slot.items():
            if entry[0] == line:
                rec.remove(line)
                rec.append(line)
                if write:
                    entry[1] = True
                return {"hit": True, "evicted": None, "dram": 0}
        window = self.window(kind)
        if window is None:
            return {"hit": False, "evicted": None, "dram": self.line_bytes}
        victim_way = None
        for w in window:
            if w not in slot:
                victim_way = w
                break
        evicted = None
        dram = self.line_bytes
        if victim_way is None:
            allowed = set(window)
            for old in rec:  # LRU first
                way = next(w for w, e in slot.items() if e[0] == old)
                if way in allowed:
                    victim_way = way
                    evicted = old
                    break
            assert victim_way is not None
            if slot[victim_way][1]:
                dram += self.line_bytes
            rec.remove(evicted)
        slot[victim_way] = [line, write]
        rec.append(line)
        return {"hit": False, "evicted": evicted, "dram": dram}
