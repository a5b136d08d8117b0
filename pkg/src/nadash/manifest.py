"""Video manifest and client playback bookkeeping shared by both policies."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

from .errors import ConfigurationError


@dataclass(frozen=True)
class VideoManifest:
    """N segments of ``segment_duration`` seconds, each offered at every ladder bitrate."""

    segment_count: int
    ladder: Tuple[float, ...]
    segment_duration: float = 2.0
    variable_bitrate: bool = False
    sizes: Optional[Tuple[Tuple[float, ...], ...]] = None
    """Per-segment, per-rung sizes in kbit; only used with ``variable_bitrate``."""

    def __post_init__(self) -> None:
        object.__setattr__(self, "ladder", tuple(float(b) for b in self.ladder))
        if self.segment_count < 1:
            raise ConfigurationError("a video needs at least one segment")
        if not self.segment_duration > 0:
            raise ConfigurationError("segment duration must be positive")
        if not self.ladder or self.ladder[0] <= 0:
            raise ConfigurationError("ladder must hold positive bitrates")
        if any(b <= a for a, b in zip(self.ladder, self.ladder[1:])):
            raise ConfigurationError(f"ladder must be strictly ascending, got {self.ladder}")
        if self.variable_bitrate:
            if self.sizes is None or len(self.sizes) != self.segment_count:
                raise ConfigurationError("variable bitrate needs one size row per segment")
            if any(len(row) != len(self.ladder) for row in self.sizes):
                raise ConfigurationError("variable bitrate size rows must match the ladder")

    @property
    def min_bitrate(self) -> float:
        return self.ladder[0]

    @property
    def max_bitrate(self) -> float:
        return self.ladder[-1]

    @property
    def duration(self) -> float:
        return self.segment_count * self.segment_duration

    def segment_size(self, segment: int, rung: int) -> float:
        if self.variable_bitrate:
            return self.sizes[segment][rung]
        return self.ladder[rung] * self.segment_duration


# Float timing drift below this is not a stall.
TIME_TOLERANCE = 1e-9


def consume(buffer: int, display: float, dt: float, segment_duration: float):
    """Play ``dt`` seconds from the client buffer.

    ``buffer`` counts whole segments queued behind the one on screen and
    ``display`` is what is left of the on-screen segment. Returns the new
    ``(buffer, display, stall)``; ``stall`` is the part of ``dt`` spent with
    nothing to play.
    """
    playable = display + buffer * segment_duration
    if dt >= playable - TIME_TOLERANCE:
        stall = dt - playable
        return 0, 0.0, (stall if stall > TIME_TOLERANCE else 0.0)
    if dt < display:
        return buffer, display - dt, 0.0
    x = dt - display
    m = min(int(x // segment_duration), buffer - 1)
    left = segment_duration - (x - m * segment_duration)
    return buffer - m - 1, (left if left > 0 else 0.0), 0.0


def arrive(buffer: int, display: float, segment_duration: float):
    """A downloaded segment joins the client buffer (or goes straight on screen)."""
    if display == 0:
        return buffer, segment_duration
    return buffer + 1, display


def buffer_capacity(buffer_limit: float, segment_duration: float) -> int:
    """Queued segments a time-bounded buffer of ``buffer_limit`` seconds can hold."""
    cap = int(buffer_limit // segment_duration + 1e-9)
    if cap < 1:
        raise ConfigurationError(
            f"buffer limit {buffer_limit}s holds no segment of {segment_duration}s"
        )
    return cap


@dataclass
class ClientState:
    """Playback state of one client; mutated by the session driver."""

    max_buffer: float
    segment_duration: float = 2.0
    playback_clock: float = 0.0
    buffer_segments: int = 0
    display_remaining: float = 0.0
    started: bool = False
    rebuffer_total: float = 0.0
    startup_delay: float = 0.0
    delivered: List[Tuple[int, float, float]] = field(default_factory=list)

    @property
    def buffer(self) -> float:
        """Seconds of downloaded video not yet on screen."""
        return self.buffer_segments * self.segment_duration

    @property
    def buffer_cap(self) -> int:
        return buffer_capacity(self.max_buffer, self.segment_duration)

    @property
    def last_bitrate(self) -> Optional[float]:
        return self.delivered[-1][1] if self.delivered else None

    @property
    def next_segment(self) -> int:
        return len(self.delivered)

    def bitrates(self) -> Sequence[float]:
        return [b for _, b, _ in self.delivered]
