"""Full-session simulation of both policies, metrics and parameter sweeps."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, Iterable, List, NamedTuple, Optional, Protocol, Sequence, Tuple

import numpy as np

from .bandwidth import BandwidthTimeline, MarkovBandwidthModel, generate_markov_timeline
from .baseline import BaselineConfig, baseline_step
from .delivery import INF
from .errors import ConfigurationError, HorizonError
from .manifest import ClientState, VideoManifest, buffer_capacity
from .qoe import count_switches, path_utility, segment_quality
from .scheduler import LAST, OK, SchedulerConfig, SearchState, Step, advance, plan_window

ANTICIPATIVE = "anticipative"
BASELINE = "baseline"
POLICIES = (ANTICIPATIVE, BASELINE)

KBIT_PER_KB = 8.0


# --- timeline sources ---------------------------------------------------------


class TimelineSource(Protocol):
    def realize(self, seed: int, hop: int, duration: float) -> BandwidthTimeline: ...


def derive_seed(seed: int, hop: int) -> int:
    return int(np.random.SeedSequence([seed, hop]).generate_state(1)[0])


@dataclass(frozen=True)
class MarkovSource:
    model: MarkovBandwidthModel

    def realize(self, seed: int, hop: int, duration: float) -> BandwidthTimeline:
        return generate_markov_timeline(self.model.with_seed(derive_seed(seed, hop)), duration)


@dataclass(frozen=True)
class TraceTimelineSource:
    """Replays a recorded timeline, starting at a seed-dependent step and wrapping around."""

    timeline: BandwidthTimeline
    randomize_offset: bool = True

    def realize(self, seed: int, hop: int, duration: float) -> BandwidthTimeline:
        tl = self.timeline
        if self.randomize_offset and len(tl.rates) > 1:
            k = derive_seed(seed, hop) % len(tl.rates)
            rates = tl.rates[k:] + tl.rates[:k]
            widths = [b - a for a, b in zip(tl.starts, tl.starts[1:] + (tl.horizon,))]
            widths = widths[k:] + widths[:k]
            starts = [0.0]
            for w in widths[:-1]:
                starts.append(starts[-1] + w)
            tl = BandwidthTimeline(tuple(starts), rates, tl.horizon)
        return tl.tiled(duration)


@dataclass(frozen=True)
class FixedSource:
    timeline: BandwidthTimeline

    def realize(self, seed: int, hop: int, duration: float) -> BandwidthTimeline:
        return self.timeline.tiled(duration)


# --- reports ------------------------------------------------------------------


@dataclass(frozen=True)
class CacheLog:
    samples: Tuple[Tuple[float, float], ...] = ()
    peak: float = 0.0
    integral: float = 0.0
    """Occupancy integrated over time, kbit*s."""

    @property
    def peak_kB(self) -> float:
        return self.peak / KBIT_PER_KB

    def mean(self, duration: float) -> float:
        return self.integral / duration if duration > 0 else 0.0


class EpochTrace(NamedTuple):
    committed: float
    """kbit the controller released to the core during the epoch."""
    points: Tuple[Tuple[float, float, float], ...]
    """``(time, staged-model occupancy, kbit delivered since epoch start)``."""


def cache_accounting(epochs: Iterable[EpochTrace]) -> CacheLog:
    """Occupancy of the edge cache over a session.

    The timing model lets the core stage any surplus; physically the cache
    only ever holds data the controller has released, so occupancy is the
    smaller of the staged amount and the released-but-undelivered amount.
    Both are linear between events; their crossings are added as samples
    so the peak and integral are exact.
    """
    samples: List[Tuple[float, float]] = []
    for epoch in epochs:
        prev = None
        for t, staged, delivered in epoch.points:
            pending = epoch.committed - delivered
            if prev is not None:
                t0, s0, p0 = prev
                f0, f1 = s0 - p0, staged - pending
                if (f0 < 0 < f1 or f1 < 0 < f0) and t > t0:
                    frac = f0 / (f0 - f1)
                    samples.append((t0 + (t - t0) * frac, max(0.0, s0 + (staged - s0) * frac)))
            samples.append((t, max(0.0, min(staged, pending))))
            prev = (t, staged, pending)
    peak = max((occ for _, occ in samples), default=0.0)
    integral = 0.0
    for (t0, a), (t1, b) in zip(samples, samples[1:]):
        if t1 > t0:
            integral += 0.5 * (a + b) * (t1 - t0)
    return CacheLog(tuple(samples), peak, integral)


@dataclass(frozen=True)
class SegmentRecord:
    segment: int
    bitrate: float
    quality: float
    request: float
    finish: float
    wait: float
    stall: float
    cache_kbit: float


@dataclass(frozen=True)
class SimulationReport:
    policy: str
    seed: Optional[int]
    buffer_s: float
    window_s: float
    utility: float
    utility_norm: float
    mean_bitrate: float
    up_switches: int
    down_switches: int
    rebuffer_total: float
    startup_delay: float
    end_time: float
    cache: CacheLog
    per_segment: Tuple[SegmentRecord, ...]
    fallbacks: int = 0
    epochs: int = 0
    config: Dict[str, object] = field(default_factory=dict)

    @property
    def fallback(self) -> bool:
        return self.fallbacks > 0

    @property
    def cache_peak_kB(self) -> float:
        return self.cache.peak_kB

    @property
    def cache_mean_kB(self) -> float:
        return self.cache.mean(self.end_time) / KBIT_PER_KB


def _report(
    policy: str,
    manifest: VideoManifest,
    client: ClientState,
    records: List[SegmentRecord],
    cache: CacheLog,
    scheduler: SchedulerConfig,
    buffer_limit: float,
    seed: Optional[int],
    fallbacks: int,
    epochs: int,
    config: Dict[str, object],
) -> SimulationReport:
    qoe = scheduler.qoe
    bitrates = [r.bitrate for r in records]
    utility = path_utility([r.quality for r in records], qoe)
    top = manifest.segment_count * segment_quality(manifest.max_bitrate, manifest.min_bitrate, qoe)
    up, down = count_switches(bitrates)
    return SimulationReport(
        policy=policy,
        seed=seed,
        buffer_s=buffer_limit,
        window_s=scheduler.window,
        utility=utility,
        utility_norm=utility / top if top else float("nan"),
        mean_bitrate=sum(bitrates) / len(bitrates),
        up_switches=up,
        down_switches=down,
        rebuffer_total=client.rebuffer_total,
        startup_delay=client.startup_delay,
        end_time=records[-1].finish + client.display_remaining + client.buffer,
        cache=cache,
        per_segment=tuple(records),
        fallbacks=fallbacks,
        epochs=epochs,
        config=config,
    )


def _apply(client: ClientState, step: Step, quality: float, cache_kbit: float) -> SegmentRecord:
    entry, st = step.entry, step.state
    if not client.started:
        client.startup_delay = entry.finish
    client.started = True
    client.buffer_segments = st.buffer
    client.display_remaining = st.display_remaining
    client.playback_clock = st.clock
    client.rebuffer_total += step.stall
    client.delivered.append((entry.segment, entry.bitrate, entry.finish))
    return SegmentRecord(
        segment=entry.segment,
        bitrate=entry.bitrate,
        quality=quality,
        request=entry.start,
        finish=entry.finish,
        wait=entry.wait,
        stall=step.stall,
        cache_kbit=cache_kbit,
    )


def run_session(
    policy: str,
    manifest: VideoManifest,
    core: BandwidthTimeline,
    edge: BandwidthTimeline,
    buffer_limit: float = 20.0,
    scheduler: Optional[SchedulerConfig] = None,
    baseline: Optional[BaselineConfig] = None,
    seed: Optional[int] = None,
) -> SimulationReport:
    """Stream the whole video under ``policy`` and collect metrics.

    The session ends when the last segment has been downloaded; its
    remaining playback is added to ``end_time``. Both policies use the
    client buffer of ``buffer_limit`` seconds.
    """
    scheduler = scheduler or SchedulerConfig()
    baseline = replace(baseline or BaselineConfig(), buffer_limit=buffer_limit)
    buffer_capacity(buffer_limit, manifest.segment_duration)
    if policy == ANTICIPATIVE:
        return _run_anticipative(manifest, core, edge, buffer_limit, scheduler, seed)
    if policy == BASELINE:
        return _run_baseline(manifest, core, edge, buffer_limit, scheduler, baseline, seed)
    raise ConfigurationError(f"unknown policy {policy!r}; expected one of {POLICIES}")


def _quality(bitrate: float, manifest: VideoManifest, scheduler: SchedulerConfig) -> float:
    return segment_quality(bitrate, manifest.min_bitrate, scheduler.qoe)


def _run_anticipative(
    manifest: VideoManifest,
    core: BandwidthTimeline,
    edge: BandwidthTimeline,
    buffer_limit: float,
    scheduler: SchedulerConfig,
    seed: Optional[int],
) -> SimulationReport:
    S = manifest.segment_duration
    client = ClientState(max_buffer=buffer_limit, segment_duration=S)
    clock = 0.0
    records: List[SegmentRecord] = []
    epochs: List[EpochTrace] = []
    fallbacks = 0
    cap = scheduler.cache_capacity
    while client.next_segment < manifest.segment_count:
        plan = plan_window(client, clock, manifest, core, edge, scheduler)
        steps: List[Step] = []
        if plan.committed:
            st = plan.state
            for entry in plan.committed:
                step = advance(st, manifest.ladder.index(entry.bitrate), manifest, core, edge, cap, record=True)
                if step.kind not in (OK, LAST) or step.entry != entry:
                    raise RuntimeError(f"replay of segment {entry.segment} diverged from its plan")
                steps.append(step)
                st = step.state
        else:
            fallbacks += 1
            st = replace(plan.state, window_end=INF)
            steps.append(advance(st, 0, manifest, core, edge, cap, allow_stall=True, record=True))
        committed = math.fsum(s.entry.size for s in steps)
        points: List[Tuple[float, float, float]] = []
        base = 0.0
        for step in steps:
            points.extend((t, q, base + d) for t, q, d in step.trace)
            base += step.entry.size
            q_end = step.trace[-1][1]
            occupancy = max(0.0, min(q_end, committed - base))
            q = _quality(step.entry.bitrate, manifest, scheduler)
            records.append(_apply(client, step, q, occupancy))
        epochs.append(EpochTrace(committed, tuple(points)))
        clock = client.playback_clock
    config = {"policy": ANTICIPATIVE, "scheduler": asdict(scheduler), "buffer_limit": buffer_limit}
    return _report(
        ANTICIPATIVE, manifest, client, records, cache_accounting(epochs), scheduler,
        buffer_limit, seed, fallbacks, len(epochs), config,
    )


def _run_baseline(
    manifest: VideoManifest,
    core: BandwidthTimeline,
    edge: BandwidthTimeline,
    buffer_limit: float,
    scheduler: SchedulerConfig,
    baseline: BaselineConfig,
    seed: Optional[int],
) -> SimulationReport:
    client = ClientState(max_buffer=buffer_limit, segment_duration=manifest.segment_duration)
    clock = 0.0
    history: List[float] = []
    records: List[SegmentRecord] = []
    samples: List[Tuple[float, float]] = [(0.0, 0.0)]
    while client.next_segment < manifest.segment_count:
        decision = baseline_step(client, clock, manifest, core, edge, baseline, history)
        history.append(decision.achieved_rate)
        rec = _apply(client, decision.step, _quality(decision.bitrate, manifest, scheduler), 0.0)
        records.append(rec)
        samples.append((rec.finish, 0.0))
        clock = client.playback_clock
    config = {"policy": BASELINE, "baseline": asdict(baseline), "buffer_limit": buffer_limit}
    return _report(
        BASELINE, manifest, client, records, CacheLog(tuple(samples), 0.0, 0.0), scheduler,
        buffer_limit, seed, 0, 0, config,
    )


# --- scenarios and sweeps -----------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    manifest: VideoManifest
    core: TimelineSource
    edge: TimelineSource
    buffer_limit: float = 20.0
    scheduler: SchedulerConfig = field(default_factory=SchedulerConfig)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)

    def horizon(self) -> float:
        return 2 * self.manifest.duration + self.scheduler.window + 60.0

    def timelines(self, seed: int, duration: Optional[float] = None) -> Tuple[BandwidthTimeline, BandwidthTimeline]:
        duration = duration or self.horizon()
        return self.core.realize(seed, 0, duration), self.edge.realize(seed, 1, duration)


def run_scenario(scenario: Scenario, policy: str, seed: int) -> SimulationReport:
    """One seeded session. Both policies see identical timelines for a seed.

    Timelines are regenerated with a doubled horizon if a session outlasts
    them; generation is prefix-stable, so the result does not depend on the
    first guess.
    """
    duration = scenario.horizon()
    for _ in range(8):
        core, edge = scenario.timelines(seed, duration)
        try:
            report = run_session(
                policy, scenario.manifest, core, edge, scenario.buffer_limit,
                scenario.scheduler, scenario.baseline, seed,
            )
            return replace(report, config={**report.config, "horizon": duration})
        except HorizonError:
            duration *= 2
    raise HorizonError(f"session for seed {seed} outlasted a {duration}s horizon")


class SweepRow(NamedTuple):
    experiment: str
    value: float
    policy: str
    utility_mean: float
    utility_std: float
    utility_norm_mean: float
    utility_norm_std: float
    bitrate_mean: float
    bitrate_std: float
    rebuffer_mean: float
    cache_peak_kB_max: float
    n: int


class SweepResult(NamedTuple):
    experiment: str
    reports: Tuple[Tuple[float, SimulationReport], ...]
    rows: Tuple[SweepRow, ...]


BUFFER_SIZE = "buffer_size"
WINDOW_SIZE = "window_size"
EXPERIMENTS = (BUFFER_SIZE, WINDOW_SIZE)


def window_config(config: SchedulerConfig, window: float) -> SchedulerConfig:
    """``config`` with a new window; the holdback shrinks with it if it would not fit."""
    holdback = min(config.interleave_holdback, config.interleave_holdback * window / config.window)
    return replace(config, window=window, interleave_holdback=holdback)


def _task(args):
    scenario, policy, seed = args
    return run_scenario(scenario, policy, seed)


def sweep(
    experiment: str,
    values: Sequence[float],
    repetitions: int,
    base: Scenario,
    seed_base: int = 0,
    policies: Sequence[str] = POLICIES,
    jobs: int = 1,
) -> SweepResult:
    """Repeat every value over seeds ``seed_base .. seed_base + repetitions - 1``.

    For a window sweep the baseline does not depend on the value and runs
    once per seed at the base buffer size.
    """
    if repetitions < 1:
        raise ConfigurationError("repetitions must be at least 1")
    if experiment not in EXPERIMENTS:
        raise ConfigurationError(f"unknown experiment {experiment!r}; expected one of {EXPERIMENTS}")
    seeds = [seed_base + r for r in range(repetitions)]
    tasks = []
    keys = []
    shared = {}
    for value in values:
        if experiment == BUFFER_SIZE:
            scenario = replace(base, buffer_limit=float(value))
        else:
            scenario = replace(base, scheduler=window_config(base.scheduler, float(value)))
        for policy in policies:
            for seed in seeds:
                if experiment == WINDOW_SIZE and policy == BASELINE:
                    if seed not in shared:
                        shared[seed] = len(tasks)
                        tasks.append((base, policy, seed))
                    keys.append((value, shared[seed]))
                    continue
                keys.append((value, len(tasks)))
                tasks.append((scenario, policy, seed))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_task, tasks))
    else:
        results = [_task(t) for t in tasks]
    reports = tuple((value, results[i]) for value, i in keys)
    return SweepResult(experiment, reports, summarize(experiment, reports, policies))


def summarize(
    experiment: str, reports: Sequence[Tuple[float, SimulationReport]], policies: Sequence[str] = POLICIES
) -> Tuple[SweepRow, ...]:
    groups: Dict[Tuple[float, str], List[SimulationReport]] = {}
    for value, rep in reports:
        groups.setdefault((value, rep.policy), []).append(rep)
    rows = []
    values = list(dict.fromkeys(v for v, _ in reports))
    for value in values:
        for policy in policies:
            reps = groups.get((value, policy))
            if not reps:
                continue
            u = np.array([r.utility for r in reps])
            un = np.array([r.utility_norm for r in reps])
            b = np.array([r.mean_bitrate for r in reps])
            rows.append(
                SweepRow(
                    experiment, float(value), policy,
                    float(u.mean()), float(u.std()), float(un.mean()), float(un.std()),
                    float(b.mean()), float(b.std()),
                    float(np.mean([r.rebuffer_total for r in reps])),
                    float(max(r.cache_peak_kB for r in reps)),
                    len(reps),
                )
            )
    return tuple(rows)
