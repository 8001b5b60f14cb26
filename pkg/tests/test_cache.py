import random

import pytest
from hypothesis import given, settings, strategies as st

from upfcachesim.cache import (
    AccessKind,
    CacheGeometry,
    CacheModelError,
    PartitionMode,
    PartitionPolicy,
    WayPartitionedCache,
)

from reference import ReferenceCache

KIND_BY_NAME = {
    "ddio_write": AccessKind.DDIO_WRITE,
    "ddio_read": AccessKind.DDIO_READ,
    "core_read": AccessKind.CORE_READ,
    "core_write": AccessKind.CORE_WRITE,
}


def small_cache(sets=4, ways=2, ddio=1, mode=PartitionMode.SHARED, core=None):
    geom = CacheGeometry(total_bytes=sets * ways * 64, ways=ways, line_bytes=64)
    part = PartitionPolicy(mode=mode, ddio_ways=ddio, core_ways=core)
    return WayPartitionedCache(geom, part)


def test_default_geometry_matches_testbed():
    g = CacheGeometry()
    assert g.total_bytes == 33 * 1024 * 1024
    assert g.ways == 11
    assert g.sets == 49152
    assert PartitionPolicy().ddio_ways == 2


def test_geometry_validation():
    with pytest.raises(CacheModelError):
        CacheGeometry(total_bytes=1000, ways=3, line_bytes=64)  # not a multiple
    with pytest.raises(CacheModelError):
        CacheGeometry(total_bytes=1024, ways=2, line_bytes=48)  # not a power of two


def test_cold_ddio_write_fills_one_line():
    c = small_cache()
    out = c.access(0, AccessKind.DDIO_WRITE)
    assert not out.hit
    assert out.evicted_line is None
    assert out.dram_bytes_moved == 64


def test_partition_containment_forces_victim():
    # 1 set x 2 ways, isolated with a single DDIO way: the second DDIO write
    # must evict the first even though way 1 is empty.
    c = small_cache(sets=1, ways=2, ddio=1, mode=PartitionMode.ISOLATED)
    a = c.access(0, AccessKind.DDIO_WRITE)
    b = c.access(1, AccessKind.DDIO_WRITE)
    assert not a.hit and a.evicted_line is None
    assert not b.hit and b.evicted_line == 0
    assert b.dram_bytes_moved == 128  # dirty writeback plus fill


def test_ddio_read_never_allocates():
    c = small_cache()
    out = c.access(5, AccessKind.DDIO_READ)
    assert not out.hit
    assert out.evicted_line is None
    assert out.dram_bytes_moved == 64  # read-through
    assert not c.resident(5)


def test_resize_widens_mask():
    c = small_cache(sets=1, ways=4, ddio=2, mode=PartitionMode.ISOLATED)
    c.access(0, AccessKind.DDIO_WRITE)
    c.access(1, AccessKind.DDIO_WRITE)
    c.resize_ddio_ways(3)
    out = c.access(2, AccessKind.DDIO_WRITE)
    assert not out.hit and out.evicted_line is None  # allocated in the new way
    assert c.way_of(2) == 2


def test_resize_identity_is_noop():
    mk = lambda: small_cache(sets=2, ways=3, ddio=2, mode=PartitionMode.ISOLATED)
    a, b = mk(), mk()
    b.resize_ddio_ways(2)
    trace = [(i * 7 % 6, k) for i, k in zip(range(30), ["ddio_write", "core_read"] * 15)]
    for line, kind in trace:
        oa = a.access(line, KIND_BY_NAME[kind])
        ob = b.access(line, KIND_BY_NAME[kind])
        assert oa == ob


def test_lazy_repartition_keeps_residency():
    # hand-traced 1-set scenario: a line resident in way 4 survives shrinking
    # the DDIO partition from 5 to 2 ways and still hits on a core read
    c = small_cache(sets=1, ways=6, ddio=5, mode=PartitionMode.ISOLATED)
    for line in range(5):
        c.access(line, AccessKind.DDIO_WRITE)
    assert c.way_of(4) == 4
    c.resize_ddio_ways(2)
    out = c.access(4, AccessKind.CORE_READ)
    assert out.hit


def test_resize_out_of_range_rejected_partition_unchanged():
    c = small_cache(sets=1, ways=4, ddio=2, mode=PartitionMode.ISOLATED)
    with pytest.raises(CacheModelError):
        c.resize_ddio_ways(4)  # would leave no core way
    with pytest.raises(CacheModelError):
        c.resize_ddio_ways(0)
    assert c.ddio_ways == 2
    assert c.core_ways == 2


def test_stats_snapshot_and_reset():
    c = small_cache()
    s0 = c.snapshot_stats()
    assert all(v.accesses == 0 for v in s0.per_kind.values())
    c.access(3, AccessKind.DDIO_WRITE)
    s1 = c.snapshot_stats()
    k = s1.per_kind[AccessKind.DDIO_WRITE]
    assert (k.accesses, k.misses, s1.dram_bytes_total) == (1, 1, 64)
    c.reset_stats()
    s2 = c.snapshot_stats()
    assert s2.dram_bytes_total == 0
    assert all(v.accesses == 0 for v in s2.per_kind.values())
    # residency untouched by reset
    assert c.access(3, AccessKind.DDIO_WRITE).hit


def test_invalid_line_rejected():
    c = small_cache()
    with pytest.raises(CacheModelError, match="address space"):
        c.access(-1, AccessKind.CORE_READ)


def test_shared_mode_contention_isolated_mode_protects():
    # interleaving core allocations with DDIO writes in the same set evicts a
    # DDIO-resident line in shared mode but never in isolated mode
    def drive(mode):
        c = small_cache(sets=1, ways=2, ddio=1, mode=mode)
        c.access(0, AccessKind.DDIO_WRITE)
        c.access(1, AccessKind.CORE_READ)
        return c.access(2, AccessKind.CORE_READ)

    shared = drive(PartitionMode.SHARED)
    isolated = drive(PartitionMode.ISOLATED)
    assert shared.evicted_line == 0  # the DDIO-written line lost to a core fill
    assert isolated.evicted_line == 1  # DDIO way untouched


def _drive_both(sets, ways, ddio, mode, core, trace):
    geom = CacheGeometry(total_bytes=sets * ways * 64, ways=ways, line_bytes=64)
    part = PartitionPolicy(mode=PartitionMode(mode), ddio_ways=ddio, core_ways=core)
    impl = WayPartitionedCache(geom, part)
    ref = ReferenceCache(sets, ways, ddio, mode, core)
    for i, (line, kind) in enumerate(trace):
        got = impl.access(line, KIND_BY_NAME[kind])
        want = ref.access(line, kind)
        assert got.hit == want["hit"], f"step {i}: hit mismatch on {kind} {line}"
        assert got.evicted_line == want["evicted"], f"step {i}: victim mismatch"
        assert got.dram_bytes_moved == want["dram"], f"step {i}: traffic mismatch"
        occupied = [x for x in impl.set_contents(line % sets) if x is not None]
        assert len(occupied) <= ways
    return impl, ref


def test_random_trace_matches_reference():
    rng = random.Random(2024)
    trace = [(rng.randrange(8), rng.choice(list(KIND_BY_NAME)))
             for _ in range(200)]
    _drive_both(4, 2, 1, "shared", None, trace)


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_reference_equivalence_property(data):
    sets = data.draw(st.sampled_from([1, 2, 4, 8]))
    ways = data.draw(st.integers(1, 4))
    mode = data.draw(st.sampled_from(["shared", "isolated"]))
    if mode == "isolated" and ways < 2:
        ways = 2
    ddio = data.draw(st.integers(1, ways - 1 if mode == "isolated" else ways))
    core = None
    if mode == "isolated":
        core = data.draw(st.one_of(st.none(), st.integers(1, ways - ddio)))
    n = data.draw(st.integers(1, 300))
    lines = st.integers(0, sets * 4)
    kinds = st.sampled_from(list(KIND_BY_NAME))
    trace = data.draw(st.lists(st.tuples(lines, kinds), min_size=n, max_size=n))
    _drive_both(sets, ways, ddio, mode, core, trace)


@settings(max_examples=30, deadline=None)
@given(st.data())
def test_resize_equivalence_property(data):
    # interleave accesses with resizes; oracle mirrors lazy repartition
    ways = data.draw(st.integers(3, 4))
    ddio = data.draw(st.integers(1, ways - 2))
    core = ways - ddio - data.draw(st.integers(0, 1))
    impl = small_cache(sets=2, ways=ways, ddio=ddio,
                       mode=PartitionMode.ISOLATED, core=core)
    ref = ReferenceCache(2, ways, ddio, "isolated", core)
    max_d = ways - ref.others - 1
    steps = data.draw(st.lists(
        st.tuples(st.integers(0, 7), st.sampled_from(list(KIND_BY_NAME)),
                  st.one_of(st.none(), st.integers(1, max_d))),
        min_size=1, max_size=120))
    for line, kind, new_d in steps:
        if new_d is not None:
            impl.resize_ddio_ways(new_d)
            ref.resize(new_d)
        got = impl.access(line, KIND_BY_NAME[kind])
        want = ref.access(line, kind)
        assert (got.hit, got.evicted_line, got.dram_bytes_moved) == \
            (want["hit"], want["evicted"], want["dram"])


def test_span_equals_sequential_accesses():
    rng = random.Random(7)
    a = small_cache(sets=8, ways=3, ddio=2)
    b = small_cache(sets=8, ways=3, ddio=2)
    for _ in range(50):
        base = rng.randrange(0, 64)
        n = rng.randrange(1, 6)
        kind = KIND_BY_NAME[rng.choice(list(KIND_BY_NAME))]
        span = a.access_span(base, n, kind)
        outs = [b.access(base + i, kind) for i in range(n)]
        assert span.hits == sum(o.hit for o in outs)
        assert span.dram_bytes_moved == sum(o.dram_bytes_moved for o in outs)
    assert a.snapshot_stats() == b.snapshot_stats()


def test_stats_consistency_invariants():
    rng = random.Random(5)
    c = small_cache(sets=8, ways=4, ddio=2, mode=PartitionMode.ISOLATED)
    for _ in range(500):
        c.access(rng.randrange(32), KIND_BY_NAME[rng.choice(list(KIND_BY_NAME))])
    s = c.snapshot_stats()
    for k, v in s.per_kind.items():
        assert v.hits + v.misses == v.accesses
    assert s.dram_bytes_total == 64 * (s.fills + s.writebacks)


def test_ddio_write_allocations_stay_in_ddio_ways():
    c = small_cache(sets=4, ways=4, ddio=2, mode=PartitionMode.ISOLATED)
    for line in range(40):
        c.access(line, AccessKind.DDIO_WRITE)
        assert c.way_of(line) < 2
    for line in range(100, 140):
        c.access(line, AccessKind.CORE_READ)
        if c.resident(line):
            assert c.way_of(line) >= 2
