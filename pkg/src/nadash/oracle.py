"""Exhaustive enumeration of bitrate sequences, used to certify the search."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .bandwidth import BandwidthTimeline
from .errors import GuardError
from .manifest import VideoManifest
from .scheduler import (
    INVALID_PATH,
    LAST,
    REBUFFER,
    TRUNCATED,
    SchedulePath,
    SchedulerConfig,
    SearchState,
    advance,
    build_path,
    greatest,
)

GUARD = 10**6


@dataclass(frozen=True)
class OracleResult:
    best_path: SchedulePath
    best_utility: float
    enumerated: int
    feasible: int


def evaluate_sequence(
    rungs: Sequence[int],
    state: SearchState,
    manifest: VideoManifest,
    core: BandwidthTimeline,
    edge: BandwidthTimeline,
    config: SchedulerConfig,
    prev_bitrate: Optional[float] = None,
) -> SchedulePath:
    """Replay one rung sequence; the path stops where the window or video ends."""
    entries = []
    storage = 0.0
    st = state
    for rung in rungs:
        if not st.started and config.force_first_min and rung != 0:
            return INVALID_PATH
        step = advance(st, rung, manifest, core, edge, config.cache_capacity)
        if step.kind == REBUFFER:
            return INVALID_PATH
        if step.kind == TRUNCATED:
            break
        entries.append(step.entry)
        storage += step.storage
        if step.kind == LAST:
            break
        st = step.state
    return build_path(entries, storage, manifest, config, prev_bitrate)


def enumerate_optimal(
    manifest: VideoManifest,
    core: BandwidthTimeline,
    edge: BandwidthTimeline,
    config: SchedulerConfig,
    state: SearchState,
    prev_bitrate: Optional[float] = None,
) -> OracleResult:
    """Score all ``M ** K`` sequences for the ``K`` segments left after ``state``.

    Pruning options in ``config`` are ignored; only the QoE, cost, cache
    capacity and first-segment settings apply.
    """
    m = len(manifest.ladder)
    k = manifest.segment_count - state.next_segment
    total = m**k
    if total > GUARD:
        raise GuardError(f"{m}^{k} = {total} sequences exceeds the guard of {GUARD}")
    best = INVALID_PATH
    feasible = 0
    for seq in itertools.product(range(m), repeat=k):
        path = evaluate_sequence(seq, state, manifest, core, edge, config, prev_bitrate)
        if path.valid:
            feasible += 1
            best = greatest(best, path)
    return OracleResult(best, best.score if best.valid else float("-inf"), total, feasible)


@dataclass(frozen=True)
class Instance:
    manifest: VideoManifest
    core: BandwidthTimeline
    edge: BandwidthTimeline
    config: SchedulerConfig
    state: SearchState
    prev_bitrate: Optional[float]


def random_instance(seed: int, n: int, m: int = 3, window: Optional[float] = None) -> Instance:
    """A small seeded instance whose window covers the whole video by default.

    Rates are drawn around the ladder so that some sequences stall, some
    overflow the window and caching matters.
    """
    rng = np.random.default_rng(seed)
    S = float(rng.choice([1.0, 2.0]))
    ladder = tuple(float(x) for x in np.sort(rng.choice(np.arange(1, 13), size=m, replace=False)) * 100)
    manifest = VideoManifest(segment_count=n, ladder=ladder, segment_duration=S)
    dwell = float(rng.choice([0.5, 1.0, 2.0]))
    horizon = 4 * n * S + 20
    steps = int(np.ceil(horizon / dwell))
    core = BandwidthTimeline.from_rates([float(x) * 100 for x in rng.integers(0, 16, size=steps)], dwell)
    edge = BandwidthTimeline.from_rates([float(x) * 100 for x in rng.integers(0, 16, size=steps)], dwell)
    started = bool(rng.random() < 0.6)
    cap = int(rng.integers(1, 5))
    if started:
        buffer = int(rng.integers(0, cap + 1))
        display = float(rng.choice([S, S / 2, S / 4]))
        prev = float(rng.choice(ladder))
    else:
        buffer, display, prev = 0, 0.0, None
    if window is None:
        window = float(min(horizon - 1, n * S * 3 + 4))
    state = SearchState(
        next_segment=0,
        clock=0.0,
        window_end=window,
        buffer=buffer,
        display_remaining=display,
        buffer_cap=cap,
        started=started,
    )
    config = SchedulerConfig(window=window, interleave_holdback=0.0, prune_floor=False)
    return Instance(manifest, core, edge, config, state, prev)


def check_agreement(instance: Instance, prune: bool = False) -> Tuple[bool, OracleResult, SchedulePath]:
    """Run search and oracle on ``instance``; True when they return the same path."""
    from .scheduler import find_optimal_path

    config = instance.config
    if prune:
        from dataclasses import replace

        config = replace(config, prune_floor=True)
    searched = find_optimal_path(
        instance.state, instance.manifest, instance.core, instance.edge, config, instance.prev_bitrate
    )
    oracle = enumerate_optimal(
        instance.manifest, instance.core, instance.edge, instance.config, instance.state, instance.prev_bitrate
    )
    same = searched.valid == oracle.best_path.valid and (
        not searched.valid
        or (searched.score == oracle.best_utility and searched.entries == oracle.best_path.entries)
    )
    return same, oracle, searched
