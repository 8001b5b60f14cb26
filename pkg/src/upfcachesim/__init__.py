"""upfcachesim: desk-scale simulator of the 5G UPF packet data path.

Models the NIC -> DDIO -> LLC -> LB thread -> worker threads -> NIC
pipeline over a way-partitioned last-level cache, together with the
closed-form DMA-leakage model, the offline descriptor/buffer configurator,
and the online DDIO-way allocator.
"""

__version__ = "0.1.0"

from .allocator import (
    ActionKind,
    AdjustmentRecord,
    AllocatorAction,
    AllocatorConfig,
    AllocatorState,
    OnlineAllocator,
    transition,
)
from .cache import (
    AccessKind,
    AccessOutcome,
    CacheGeometry,
    CacheModelError,
    CacheStats,
    PartitionMode,
    PartitionPolicy,
    SpanOutcome,
    WayPartitionedCache,
)
from .configurator import (
    OfflineSearchReport,
    SearchSpace,
    Selection,
    SweepAxis,
    SweepRecord,
    full_grid_search,
    full_offline_search,
    select,
    sweep,
)
from .errors import ConfigError, InvariantViolation
from .leakage import (
    DescriptorFootprint,
    LeakageParams,
    MonteCarloLeakage,
    concentration_bound,
    descriptor_footprint,
    empty_bin_fraction,
    expected_leakage,
    leakage_ratio,
    monte_carlo_leakage,
)
from .pipeline import (
    Mbuf,
    MbufState,
    PipelineConfig,
    SimResult,
    TimelineRow,
    TimingConfig,
    run,
)
from .profiler import (
    IntervalCounters,
    MetricsDelta,
    MetricsSnapshot,
    Trend,
    classify,
    delta_and_classify,
    snapshot,
)
from .traffic import (
    FixedSize,
    OnOffBurst,
    Packet,
    SizeMixture,
    TrafficProfile,
    generate,
)
