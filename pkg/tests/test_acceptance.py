"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -s`` for the lines alone; they are
also printed during a normal run.
"""

import math
import time

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from nadash.bandwidth import BandwidthTimeline
from nadash.cli import main
from nadash.config import bundled_config, load_config
from nadash.delivery import deliverable
from nadash.manifest import VideoManifest
from nadash.oracle import check_agreement, random_instance
from nadash.qoe import QoeParams, path_utility, segment_quality, switch_penalty
from nadash.scheduler import segment_download_finish
from nadash.simcore import ANTICIPATIVE, BASELINE, BUFFER_SIZE, run_scenario, run_session, sweep

LN3 = math.log(3)
BUFFER_VALUES = (10, 20, 30, 40)
SWEEP_SEEDS = 20


@pytest.fixture
def verdict(capsys):
    def emit(number, title, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {title}"
        if detail:
            line += f" ({detail})"
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return emit


@pytest.fixture(scope="module")
def case1_sweep():
    config = load_config(bundled_config("paper_case1.cfg"), env={})
    start = time.perf_counter()
    result = sweep(BUFFER_SIZE, BUFFER_VALUES, SWEEP_SEEDS, config.scenario())
    return result, time.perf_counter() - start


def test_criterion_1_worked_example(verdict):
    start = time.perf_counter()
    core = BandwidthTimeline.constant(300, 4)
    edge = BandwidthTimeline.from_rates([100, 500], 2)
    first = segment_download_finish(200, 0, 0, core, edge)
    with_cache = deliverable(core, edge, 2, 4, cache=first[1])
    end_to_end = deliverable(core, edge, 2, 4, capacity=0)
    elapsed = time.perf_counter() - start
    ok = first == (2, 400) and with_cache == 1000 and end_to_end == 600 and elapsed < 1
    verdict(1, "worked example", ok,
            f"finish={first[0]} s, cache={first[1]} kbit, [2,4] s: {with_cache} vs {end_to_end} kbit")


def test_criterion_2_intro_example(verdict):
    start = time.perf_counter()
    core = BandwidthTimeline.from_rates([2, 1], 1)
    edge = BandwidthTimeline.from_rates([1, 2], 1)
    cached, direct = deliverable(core, edge, 0, 2), deliverable(core, edge, 0, 2, capacity=0)
    ok = cached == 3 and direct == 2 and time.perf_counter() - start < 1
    verdict(2, "two-slot example", ok, f"{cached} vs {direct} units")


def test_criterion_3_oracle_equivalence(verdict):
    start = time.perf_counter()
    instances = [(seed, n) for seed in range(60) for n in (3, 4, 5, 6)]
    mismatches = [key for key in instances if not check_agreement(random_instance(*key))[0]]
    elapsed = time.perf_counter() - start
    ok = not mismatches and elapsed < 60
    verdict(3, "search agrees with exhaustive enumeration", ok,
            f"{len(instances) - len(mismatches)}/{len(instances)} in {elapsed:.1f} s, N<=6, M=3")


def test_criterion_4_qoe_arithmetic(verdict):
    params = QoeParams()
    q = segment_quality(300, 100, params)
    up = switch_penalty(0, q, params)
    total = path_utility([q, 0, q], params)
    pair = path_utility([0, q], params)
    ok = all(abs(a - b) < 1e-12 for a, b in ((q, LN3), (up, 0.1 * LN3), (total, 0.9 * LN3), (pair, 0.9 * LN3)))
    verdict(4, "quality and penalty arithmetic", ok, f"q={q!r}, up={up!r}, total={total!r}")


def test_criterion_5_utility_gain(verdict, case1_sweep):
    result, elapsed = case1_sweep
    rows = {(r.value, r.policy): r for r in result.rows}
    gaps, details = [], []
    for value in BUFFER_VALUES:
        anti, base = rows[(value, ANTICIPATIVE)], rows[(value, BASELINE)]
        gap = anti.utility_norm_mean - base.utility_norm_mean
        gaps.append(gap >= 0.10 and anti.bitrate_mean >= base.bitrate_mean and anti.n >= SWEEP_SEEDS)
        details.append(f"B={value}: +{100 * gap:.1f} pts, {anti.bitrate_mean:.0f} vs {base.bitrate_mean:.0f} kbit/s")
    ok = all(gaps) and elapsed < 600
    verdict(5, "normalized utility gain over the baseline", ok, "; ".join(details) + f"; {elapsed:.0f} s")


def test_criterion_6_zero_rebuffer_markov(verdict):
    config = load_config(bundled_config("paper_case1.cfg"), env={})
    scenario = config.scenario()
    floor = config.manifest.min_bitrate
    assert min(config.core.model.state_rates) >= floor and min(config.edge.model.state_rates) >= floor
    stalled = [seed for seed in range(100) if run_scenario(scenario, ANTICIPATIVE, seed).rebuffer_total != 0]
    verdict(6, "no rebuffering when both hops stay above the lowest rung", not stalled,
            f"{100 - len(stalled)}/100 seeds of the case-1 chains")


@settings(max_examples=150, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(
    core=st.lists(st.integers(1, 30), min_size=1, max_size=40),
    edge=st.lists(st.integers(1, 30), min_size=1, max_size=40),
    dwell=st.sampled_from([0.5, 1.0, 2.0, 3.0]),
    segments=st.integers(1, 25),
    buffer_limit=st.sampled_from([4.0, 10.0, 20.0]),
)
def test_criterion_6_zero_rebuffer_property(core, edge, dwell, segments, buffer_limit, capsys):
    manifest = VideoManifest(segments, (100.0, 400.0, 1000.0))
    tiles = int(math.ceil((4 * segments * 2 + 60) / dwell))
    core_tl = BandwidthTimeline.from_rates([100.0 * r for r in (core * tiles)[:tiles]], dwell)
    edge_tl = BandwidthTimeline.from_rates([100.0 * r for r in (edge * tiles)[:tiles]], dwell)
    report = run_session(ANTICIPATIVE, manifest, core_tl, edge_tl, buffer_limit=buffer_limit)
    if report.rebuffer_total != 0:
        with capsys.disabled():
            print("\nFAIL criterion 6: rebuffering on a generated timeline above the lowest rung")
    assert report.rebuffer_total == 0


def test_criterion_7_cache_occupancy(verdict, case1_sweep):
    result, _ = case1_sweep
    peaks = [r.cache_peak_kB for _, r in result.reports if r.policy == ANTICIPATIVE and r.buffer_s == 20]
    peak = max(peaks)
    ok = all(math.isfinite(p) and 0 <= p <= 1000 for p in peaks)
    # the 0..365 kB comparison band is informational only
    band = sum(p <= 365 for p in peaks)
    verdict(7, "cache peak within 0..1000 kB", ok,
            f"max {peak:.0f} kB over {len(peaks)} runs; {band}/{len(peaks)} within 365 kB")


@pytest.mark.parametrize("rate", [1000.0, 1500.0, 5000.0])
def test_criterion_8_baseline_converges(verdict, rate):
    tl = BandwidthTimeline.constant(rate, 2000)
    report = run_session(BASELINE, VideoManifest(60, (100.0, 400.0, 1000.0)), tl, tl)
    bitrates = [s.bitrate for s in report.per_segment]
    first = bitrates.index(1000) if 1000 in bitrates else len(bitrates)
    ok = first < 5 and set(bitrates[first:]) == {1000}
    verdict(8, f"baseline locks onto the top rung at {rate:.0f} kbit/s", ok, f"top rung from segment {first}")


@pytest.mark.parametrize("name", ["paper_case1.cfg", "paper_case2.cfg", "paper_trace.cfg"])
def test_criterion_9_determinism(verdict, tmp_path, name):
    outputs = []
    for run in ("a", "b"):
        out = tmp_path / run
        args = ["run", name, "--repetitions", "1", "--output", str(out), "--emit-timelines", "--per-segment", "-q"]
        assert main(args) == 0
        outputs.append({p.relative_to(out): p.read_bytes() for p in sorted(out.rglob("*.csv"))})
    ok = outputs[0] == outputs[1] and len(outputs[0]) >= 5
    verdict(9, f"byte-identical reruns of {name}", ok, f"{len(outputs[0])} files")
