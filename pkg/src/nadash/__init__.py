"""Network-assisted DASH rate adaptation: cache-aware windowed scheduling and a client-driven baseline."""

from .bandwidth import (
    BandwidthTimeline,
    MarkovBandwidthModel,
    TraceSource,
    cumulative,
    generate_markov_timeline,
    load_trace,
    unused_capacity,
)
from .baseline import BaselineConfig, baseline_step, estimate_rate, select_bitrate
from .errors import (
    ConfigurationError,
    DomainError,
    GuardError,
    HorizonError,
    IngestionError,
    NadashError,
    RangeError,
)
from .manifest import ClientState, VideoManifest
from .oracle import OracleResult, enumerate_optimal
from .qoe import CostParams, QoeParams, path_cost, path_utility, segment_quality, switch_penalty
from .scheduler import SchedulePath, SchedulerConfig, SearchState, find_optimal_path, plan_window, segment_download_finish
from .simcore import CacheLog, Scenario, SimulationReport, cache_accounting, run_scenario, run_session, sweep

__version__ = "0.1.0"
