"""Coded caching for a shared link with nonuniform file popularities.

Library layout:

* :mod:`codedcache.popularity` - profiles and factor-two / two-group partitions
* :mod:`codedcache.analytic` - peak rate, HPF baselines, grouped rates, bounds
* :mod:`codedcache.allocator` - per-group memory optimization, tradeoff sweeps
* :mod:`codedcache.bitsim` - bit-exact placement / delivery / decoding
* :mod:`codedcache.probability` - demand sampling and distinct-count law
* :mod:`codedcache.cli` - command-line front end
"""

from .analytic import (
    BoundReport,
    LOWER_BOUND_CONSTANT,
    RateQuery,
    cutset_lower_bound,
    grouped_expected_rate_exact,
    grouped_rate_jensen,
    hpf_expected_rate,
    peak_rate,
    theorem2_lower_bound,
)
from .allocator import (
    MemoryAllocation,
    OptimizerError,
    TradeoffCurve,
    bound_report,
    optimize_allocation,
    tradeoff_curve,
)
from .bitsim import (
    CacheState,
    DecodeError,
    DeliveryTranscript,
    Library,
    SimulationResult,
    decode,
    deliver,
    make_library,
    place,
    simulate_expected_rate,
)
from .popularity import (
    FileGrouping,
    PopularityProfile,
    ProfileParseError,
    dump_profile,
    group_count_bound,
    load_profile,
    partition_factor_two,
    partition_two_group,
    uniform_profile,
    zipf_profile,
)
from .probability import (
    CouponBoundCheck,
    DistinctCountDistribution,
    coupon_bound_check,
    demand_sample,
    distinct_count_distribution,
    group_counts,
)

__all__ = [
    "BoundReport",
    "CacheState",
    "CouponBoundCheck",
    "DecodeError",
    "DeliveryTranscript",
    "DistinctCountDistribution",
    "FileGrouping",
    "LOWER_BOUND_CONSTANT",
    "Library",
    "MemoryAllocation",
    "OptimizerError",
    "PopularityProfile",
    "ProfileParseError",
    "RateQuery",
    "SimulationResult",
    "TradeoffCurve",
    "bound_report",
    "coupon_bound_check",
    "cutset_lower_bound",
    "decode",
    "deliver",
    "demand_sample",
    "distinct_count_distribution",
    "dump_profile",
    "group_count_bound",
    "group_counts",
    "grouped_expected_rate_exact",
    "grouped_rate_jensen",
    "hpf_expected_rate",
    "load_profile",
    "make_library",
    "optimize_allocation",
    "partition_factor_two",
    "partition_two_group",
    "peak_rate",
    "place",
    "simulate_expected_rate",
    "theorem2_lower_bound",
    "tradeoff_curve",
    "uniform_profile",
    "zipf_profile",
]

__version__ = "0.1.0"
