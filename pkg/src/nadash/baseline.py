"""Client-driven DASH baseline: moving-average throughput rule, time-bounded buffer."""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .bandwidth import BandwidthTimeline
from .delivery import INF
from .errors import ConfigurationError
from .manifest import ClientState, VideoManifest
from .scheduler import PathEntry, SearchState, Step, advance


@dataclass(frozen=True)
class BaselineConfig:
    history_k: int = 5
    buffer_limit: float = 20.0
    safety_factor: float = 1.0

    def __post_init__(self) -> None:
        if self.history_k < 1:
            raise ConfigurationError("history_k must be at least 1")
        if not self.buffer_limit > 0:
            raise ConfigurationError("buffer_limit must be positive")
        if not self.safety_factor > 0:
            raise ConfigurationError("safety_factor must be positive")


def estimate_rate(history: Sequence[float], config: BaselineConfig) -> float:
    """Mean of the last ``history_k`` per-segment throughputs; 0 with no history."""
    if not history:
        return 0.0
    recent = history[-config.history_k :]
    return sum(recent) / len(recent) * config.safety_factor


# Achieved rates are size / elapsed time in floating point; an estimate that
# equals a rung in exact arithmetic may land a few ulps below it.
RATE_TOLERANCE = 1e-9


def select_bitrate(estimate: float, ladder: Sequence[float]) -> float:
    """Highest rung not above ``estimate``; the lowest rung if none is."""
    k = bisect.bisect_right(ladder, estimate * (1 + RATE_TOLERANCE)) - 1
    return ladder[max(k, 0)]


class BaselineDecision(NamedTuple):
    bitrate: float
    estimate: float
    step: Step

    @property
    def entry(self) -> PathEntry:
        return self.step.entry

    @property
    def achieved_rate(self) -> float:
        e = self.step.entry
        return e.size / (e.finish - e.start)


def baseline_step(
    client: ClientState,
    clock: float,
    manifest: VideoManifest,
    core: BandwidthTimeline,
    edge: BandwidthTimeline,
    config: BaselineConfig,
    history: Sequence[float],
) -> BaselineDecision:
    """Fetch the next segment the way a throughput-based player would.

    With a full buffer the player idles until the on-screen segment ends.
    The download crosses the edge node without caching, so it proceeds at
    min(core, edge) at every instant. Stalls are recorded, never refused.
    """
    estimate = estimate_rate(history, config)
    bitrate = select_bitrate(estimate, manifest.ladder)
    rung = manifest.ladder.index(bitrate)
    state = SearchState(
        next_segment=client.next_segment,
        clock=clock,
        window_end=INF,
        buffer=client.buffer_segments,
        display_remaining=client.display_remaining,
        buffer_cap=client.buffer_cap,
        started=client.started,
    )
    step = advance(state, rung, manifest, core, edge, cache_capacity=0.0, allow_stall=True)
    return BaselineDecision(bitrate, estimate, step)
