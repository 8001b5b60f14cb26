import pytest
from hypothesis import given, strategies as st

from upfcachesim.profiler import (
    IntervalCounters,
    MetricsSnapshot,
    ProfilerError,
    Trend,
    classify,
    delta_and_classify,
    snapshot,
)


def test_idle_interval_rates_default_to_zero():
    snap = snapshot(IntervalCounters(), t=0.01, window=0.01)
    assert snap.ddio_write_miss_rate == 0.0
    assert snap.llc_miss_rate == 0.0
    assert snap.pcie_bandwidth == 0.0


def test_rate_arithmetic():
    cnt = IntervalCounters(ddio_writes=10, ddio_write_misses=4,
                           core_accesses=8, core_misses=2,
                           dram_bytes=640, pcie_bytes=1280, tx_bits=8000)
    snap = snapshot(cnt, t=0.02, window=0.01)
    assert snap.ddio_write_miss_rate == pytest.approx(0.4)
    assert snap.llc_miss_rate == pytest.approx(0.25)
    assert snap.dram_bandwidth == pytest.approx(64000)
    assert snap.pcie_bandwidth == pytest.approx(128000)
    assert snap.throughput_bps == pytest.approx(800000)


def test_zero_window_rejected():
    with pytest.raises(ProfilerError):
        snapshot(IntervalCounters(), t=0.0, window=0.0)


def _snap(t, pcie=0.0, ddio=0.0, llc=0.0):
    return MetricsSnapshot(t=t, pcie_bandwidth=pcie, ddio_write_miss_rate=ddio,
                           llc_miss_rate=llc, dram_bandwidth=0.0, throughput_bps=0.0)


def test_identical_snapshots_are_steady():
    prev = _snap(0.01, pcie=5e9, ddio=0.3, llc=0.2)
    cur = _snap(0.02, pcie=5e9, ddio=0.3, llc=0.2)
    d = delta_and_classify(prev, cur, 0.05)
    assert d.pcie_bandwidth is Trend.STEADY
    assert d.ddio_write_miss_rate is Trend.STEADY
    assert d.llc_miss_rate is Trend.STEADY
    assert d.diffs == (0.0, 0.0, 0.0)


def test_rising_and_inside_band():
    assert classify(0.30, 0.40, 0.05) is Trend.RISING
    assert classify(0.30, 0.31, 0.05) is Trend.STEADY
    assert classify(0.40, 0.30, 0.05) is Trend.FALLING


def test_non_monotone_timestamps_rejected():
    with pytest.raises(ProfilerError):
        delta_and_classify(_snap(0.02), _snap(0.02))
    with pytest.raises(ProfilerError):
        delta_and_classify(_snap(0.03), _snap(0.02))


@given(x=st.floats(min_value=0, max_value=1e12, allow_nan=False))
def test_classify_self_is_steady(x):
    assert classify(x, x) is Trend.STEADY


@given(a=st.floats(min_value=0, max_value=1e9, allow_nan=False),
       b=st.floats(min_value=0, max_value=1e9, allow_nan=False),
       eps=st.floats(min_value=0.001, max_value=0.5))
def test_classify_antisymmetry(a, b, eps):
    fwd = classify(a, b, eps)
    rev = classify(b, a, eps)
    if fwd is Trend.RISING:
        assert rev is Trend.FALLING
    elif fwd is Trend.FALLING:
        assert rev is Trend.RISING
    else:
        assert rev is Trend.STEADY
