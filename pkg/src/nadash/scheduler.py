"""Window-limited recursive search for the best bitrate path.

The controller knows core and edge capacity for the next ``window``
seconds. Starting from the client's playback state it explores every
bitrate sequence, timing each download with the cache-assisted delivery
model: while a segment downloads, surplus core capacity is staged at the
edge and shortens later downloads. A branch is dropped when a download
would stall playback; a path ends when the next download no longer fits in
the window or the video ends. The best path under the QoE objective wins.

A utility upper bound (branch and bound) keeps the search tractable
without changing its result. Dropping rungs below the window's guaranteed
bottleneck rate is available as an opt-in heuristic; it is not exact,
because a cheap segment can buy time for a later expensive one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import List, NamedTuple, Optional, Sequence, Tuple

from .bandwidth import BandwidthTimeline
from .delivery import INF, transfer
from .errors import ConfigurationError
from .manifest import ClientState, VideoManifest, arrive, consume
from .qoe import CostParams, QoeParams, count_switches, path_cost, path_utility, segment_quality


@dataclass(frozen=True)
class SchedulerConfig:
    window: float = 10.0
    interleave_holdback: float = 4.0
    max_downswitches: Optional[int] = None
    prune_floor: bool = False
    bound_pruning: bool = True
    force_first_min: bool = True
    cache_capacity: float = INF
    qoe: QoeParams = field(default_factory=QoeParams)
    cost: CostParams = field(default_factory=CostParams)

    def __post_init__(self) -> None:
        if not self.window > 0:
            raise ConfigurationError("window must be positive")
        if not 0 <= self.interleave_holdback < self.window:
            raise ConfigurationError(
                f"interleave holdback {self.interleave_holdback} must lie in [0, window={self.window})"
            )
        if self.max_downswitches is not None and self.max_downswitches < 0:
            raise ConfigurationError("max_downswitches must be nonnegative")
        if self.cache_capacity < 0:
            raise ConfigurationError("cache capacity must be nonnegative")


@dataclass(frozen=True)
class SearchState:
    next_segment: int
    clock: float
    window_end: float
    buffer: int
    """Whole segments queued behind the one on screen."""
    display_remaining: float
    buffer_cap: int
    residual_cache: float = 0.0
    started: bool = True

    @property
    def window_remaining(self) -> float:
        return max(0.0, self.window_end - self.clock)

    @classmethod
    def from_client(cls, client: ClientState, clock: float, window: float) -> "SearchState":
        return cls(
            next_segment=client.next_segment,
            clock=clock,
            window_end=clock + window,
            buffer=client.buffer_segments,
            display_remaining=client.display_remaining,
            buffer_cap=client.buffer_cap,
            residual_cache=0.0,
            started=client.started,
        )


class PathEntry(NamedTuple):
    segment: int
    bitrate: float
    start: float
    finish: float
    deadline: float
    cache_after: float
    size: float
    wait: float = 0.0
    """Idle time spent waiting for buffer room before ``start``."""
    playable: float = INF
    """Video the client had left to play at ``start``."""


@dataclass(frozen=True)
class SchedulePath:
    entries: Tuple[PathEntry, ...] = ()
    utility: float = 0.0
    valid: bool = False
    storage: float = 0.0
    cost: float = 0.0
    prev_bitrate: Optional[float] = None

    @property
    def score(self) -> float:
        return self.utility - self.cost

    @property
    def bitrates(self) -> Tuple[float, ...]:
        return tuple(e.bitrate for e in self.entries)

    @property
    def total_kbit(self) -> float:
        return math.fsum(e.size for e in self.entries)

    @property
    def switches(self) -> int:
        seq = self.bitrates if self.prev_bitrate is None else (self.prev_bitrate,) + self.bitrates
        up, down = count_switches(seq)
        return up + down


INVALID_PATH = SchedulePath()


def greatest(a: SchedulePath, b: SchedulePath) -> SchedulePath:
    """The better of two paths under a total order.

    Validity first, then objective, then fewer switches, then less data,
    then the lexicographically lower bitrate sequence; ``a`` on a full tie.
    """
    if not b.valid:
        return a
    if not a.valid:
        return b
    if b.score != a.score:
        return b if b.score > a.score else a
    if b.switches != a.switches:
        return b if b.switches < a.switches else a
    if b.total_kbit != a.total_kbit:
        return b if b.total_kbit < a.total_kbit else a
    return b if b.bitrates < a.bitrates else a


# --- one download step -------------------------------------------------------

OK, LAST, TRUNCATED, REBUFFER = "ok", "last", "truncated", "rebuffer"


class Step(NamedTuple):
    kind: str
    entry: Optional[PathEntry] = None
    state: Optional[SearchState] = None
    stall: float = 0.0
    storage: float = 0.0
    trace: Tuple[Tuple[float, float, float], ...] = ()
    """``(time, cache, delivered)`` through the wait and download, when recorded."""


def segment_download_finish(
    size: float,
    start: float,
    cache_at_start: float,
    core: BandwidthTimeline,
    edge: BandwidthTimeline,
    until: float = INF,
    cache_capacity: float = INF,
) -> Tuple[float, float]:
    """``(finish, cache_at_finish)`` for one segment download.

    ``finish`` is ``inf`` when the segment cannot complete by ``until``.
    """
    tr = transfer(core, edge, start, cache_at_start, demand=size, until=until, capacity=cache_capacity)
    return tr.finish, tr.cache


def advance(
    state: SearchState,
    rung: int,
    manifest: VideoManifest,
    core: BandwidthTimeline,
    edge: BandwidthTimeline,
    cache_capacity: float = INF,
    allow_stall: bool = False,
    record: bool = False,
) -> Step:
    """Schedule segment ``state.next_segment`` at ladder rung ``rung``.

    Waits for buffer room first (the core keeps staging data meanwhile),
    then downloads. The same routine times the search, the oracle and the
    session driver, so all three agree to the last bit.
    """
    S = manifest.segment_duration
    clock = state.clock
    cache = state.residual_cache
    buf, disp = state.buffer, state.display_remaining
    storage = 0.0
    wait = 0.0
    trace = ()
    if state.started and buf >= state.buffer_cap:
        wait_end = clock + disp
        if wait_end > state.window_end:
            return Step(TRUNCATED)
        if disp > 0:
            staged = transfer(
                core, edge, clock, cache, None, until=wait_end, capacity=cache_capacity, record=record
            )
            cache = staged.cache
            storage = staged.storage
            if record:
                trace = staged.trace
        wait = disp
        buf, disp, _ = consume(buf, disp, disp, S)
        clock = wait_end

    segment = state.next_segment
    size = manifest.segment_size(segment, rung)
    tr = transfer(
        core, edge, clock, cache, demand=size, until=state.window_end, capacity=cache_capacity, record=record
    )
    if not tr.finish < state.window_end:
        return Step(TRUNCATED)
    elapsed = tr.finish - clock
    stall = 0.0
    if state.started:
        playable = disp + buf * S
        buf, disp, stall = consume(buf, disp, elapsed, S)
        if stall > 0 and not allow_stall:
            return Step(REBUFFER)
    else:
        playable = INF
    buf, disp = arrive(buf, disp, S)
    entry = PathEntry(
        segment=segment,
        bitrate=manifest.ladder[rung],
        start=clock,
        finish=tr.finish,
        deadline=clock + playable,
        cache_after=tr.cache,
        size=size,
        wait=wait,
        playable=playable,
    )
    nxt = SearchState(
        next_segment=segment + 1,
        clock=tr.finish,
        window_end=state.window_end,
        buffer=buf,
        display_remaining=disp,
        buffer_cap=state.buffer_cap,
        residual_cache=tr.cache,
        started=True,
    )
    kind = LAST if segment + 1 >= manifest.segment_count else OK
    if record:
        trace = trace + tr.trace
    return Step(kind, entry, nxt, stall, storage + tr.storage, trace)


# --- search -----------------------------------------------------------------


def allowed_rungs(
    state: SearchState,
    manifest: VideoManifest,
    core: BandwidthTimeline,
    edge: BandwidthTimeline,
    config: SchedulerConfig,
) -> List[int]:
    """Ladder rungs worth exploring in this window, highest first."""
    rungs = list(range(len(manifest.ladder)))
    if config.prune_floor and not manifest.variable_bitrate:
        end = min(state.window_end, core.horizon, edge.horizon)
        floor = min(core.min_rate(state.clock, end), edge.min_rate(state.clock, end))
        supported = [k for k in rungs if manifest.ladder[k] <= floor]
        if supported:
            rungs = rungs[supported[-1]:]
    return rungs[::-1]


def build_path(
    entries: Sequence[PathEntry],
    storage: float,
    manifest: VideoManifest,
    config: SchedulerConfig,
    prev_bitrate: Optional[float],
) -> SchedulePath:
    if not entries:
        return INVALID_PATH
    qoe = config.qoe
    rmin = manifest.min_bitrate
    qualities = [segment_quality(e.bitrate, rmin, qoe) for e in entries]
    prev_q = None if prev_bitrate is None else segment_quality(prev_bitrate, rmin, qoe)
    path = SchedulePath(
        entries=tuple(entries),
        utility=path_utility(qualities, qoe, prev_q),
        valid=True,
        storage=storage,
        prev_bitrate=prev_bitrate,
    )
    if config.cost.enabled:
        path = replace(path, cost=path_cost(path, config.cost))
    return path


class _Bound:
    """Upper bound on the utility the rest of a window can still add.

    Qualities are concave in bitrate, so spreading the edge's remaining
    volume evenly over ``n`` segments maximises their summed quality; the
    bound takes the best ``n`` the buffer and window allow. Penalties and
    costs are nonnegative and ignored.
    """

    def __init__(self, manifest: VideoManifest, qoe: QoeParams, rungs: Sequence[int]):
        rungs = sorted(rungs)
        S = manifest.segment_duration
        self.S = S
        self.sizes = [manifest.ladder[k] * S for k in rungs]
        self.values = [segment_quality(manifest.ladder[k], manifest.min_bitrate, qoe) for k in rungs]
        self.n_total = manifest.segment_count

    def hull(self, x: float) -> float:
        sizes, values = self.sizes, self.values
        if x >= sizes[-1]:
            return values[-1]
        for k in range(len(sizes) - 1):
            if x < sizes[k + 1]:
                frac = (x - sizes[k]) / (sizes[k + 1] - sizes[k])
                return values[k] + frac * (values[k + 1] - values[k])
        return values[-1]

    def __call__(self, state: SearchState, edge: BandwidthTimeline) -> float:
        remaining = self.n_total - state.next_segment
        span = state.window_end - state.clock
        room = state.buffer_cap - state.buffer + int(span // self.S) + 2
        n_max = min(remaining, room if state.started else room + 1)
        end = min(state.window_end, edge.horizon)
        if n_max <= 0 or end <= state.clock:
            return 0.0
        volume = edge.cumulative(state.clock, end)
        best = 0.0
        smallest = self.sizes[0]
        for n in range(1, n_max + 1):
            share = volume / n
            if share < smallest:
                break
            value = n * self.hull(share)
            if value > best:
                best = value
        return best


def find_optimal_path(
    state: SearchState,
    manifest: VideoManifest,
    core: BandwidthTimeline,
    edge: BandwidthTimeline,
    config: SchedulerConfig,
    prev_bitrate: Optional[float] = None,
) -> SchedulePath:
    """Best valid path from ``state`` within its knowledge window.

    ``prev_bitrate`` is the bitrate of the segment played before the
    window, so a quality drop at the window boundary is penalised. Returns
    an invalid path when no sequence avoids stalling.
    """
    if state.next_segment >= manifest.segment_count:
        return INVALID_PATH
    qoe = config.qoe
    rmin = manifest.min_bitrate
    rungs = allowed_rungs(state, manifest, core, edge, config)
    qualities = [segment_quality(b, rmin, qoe) for b in manifest.ladder]
    bound = None
    if config.bound_pruning and not manifest.variable_bitrate:
        bound = _Bound(manifest, qoe, sorted(set(rungs) | {0}))
    limit = config.max_downswitches
    cap = config.cache_capacity
    startup_rungs = [0] if config.force_first_min else rungs

    best = INVALID_PATH
    entries: List[PathEntry] = []

    def consider(value: float, storage: float) -> None:
        nonlocal best
        if not entries:
            return
        if best.valid and value < best.score - _slack(best.score):
            return
        best = greatest(best, build_path(entries, storage, manifest, config, prev_bitrate))

    def search(st: SearchState, value: float, prev_q: Optional[float], downs: int, storage: float) -> None:
        if bound is not None and best.valid:
            if value + bound(st, edge) < best.score - _slack(best.score):
                return
        for rung in (rungs if st.started else startup_rungs):
            step = advance(st, rung, manifest, core, edge, cap)
            if step.kind == REBUFFER:
                continue
            if step.kind == TRUNCATED:
                consider(value, storage)
                continue
            q = qualities[rung]
            d = downs
            v = value + q
            if prev_q is not None:
                if q >= prev_q:
                    v -= qoe.eta_up * (q - prev_q)
                else:
                    v -= -qoe.gamma_down * (q - prev_q)
                    d += 1
            if limit is not None and d > limit:
                continue
            entries.append(step.entry)
            if step.kind == LAST:
                consider(v, storage + step.storage)
            else:
                search(step.state, v, q, d, storage + step.storage)
            entries.pop()

    prev_q0 = None if prev_bitrate is None else segment_quality(prev_bitrate, rmin, qoe)
    search(state, 0.0, prev_q0, 0, 0.0)
    if not best.valid and len(rungs) < len(manifest.ladder):
        # the floor cut can remove the only rungs that fit a short buffer
        return find_optimal_path(state, manifest, core, edge, replace(config, prune_floor=False), prev_bitrate)
    return best


def _slack(score: float) -> float:
    return 1e-9 * max(1.0, abs(score))


# --- interleaved windows ----------------------------------------------------


class WindowPlan(NamedTuple):
    path: SchedulePath
    committed: Tuple[PathEntry, ...]
    state: SearchState
    """Search state the plan was computed from."""
    cutoff: float


def commit_prefix(path: SchedulePath, cutoff: float, segment_count: int) -> Tuple[PathEntry, ...]:
    """Entries of ``path`` to apply: downloads starting before ``cutoff``.

    A window that reaches the end of the video is applied whole; at least
    one entry is always committed.
    """
    if not path.valid:
        return ()
    entries = path.entries
    if entries[-1].segment == segment_count - 1:
        return entries
    kept = tuple(e for e in entries if e.start < cutoff)
    return kept or entries[:1]


def plan_window(
    session: ClientState,
    clock: float,
    manifest: VideoManifest,
    core: BandwidthTimeline,
    edge: BandwidthTimeline,
    config: SchedulerConfig,
) -> WindowPlan:
    state = SearchState.from_client(session, clock, config.window)
    path = find_optimal_path(state, manifest, core, edge, config, session.last_bitrate)
    cutoff = clock + config.window - config.interleave_holdback
    return WindowPlan(path, commit_prefix(path, cutoff, manifest.segment_count), state, cutoff)
