"""Normalized delivery time of decentralized coded caching in a 2-EN fog-RAN."""

from .core import (
    ConfigError,
    DemandVector,
    FragmentKey,
    LowerBoundResult,
    NdtBreakdown,
    StageNdt,
    SystemConfig,
    UnsupportedTopologyError,
    enumerate_fragment_keys,
    validate_config,
    worst_case_demands,
)

__version__ = "0.1.0"
