"""Core and edge bandwidth timelines.

Rates are kbit/s, volumes kbit, times seconds. A timeline is a
piecewise-constant rate function starting at t = 0; integrals over it are
evaluated in closed form, so integer or ``Fraction`` inputs give exact
results.
"""

from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ConfigurationError, IngestionError, RangeError

Number = Union[int, float, Fraction]

ROW_SUM_TOLERANCE = 1e-9


@dataclass(frozen=True)
class BandwidthTimeline:
    """Piecewise-constant rate of one network hop.

    ``starts[k]`` is the time step ``k`` begins and ``rates[k]`` its rate;
    the last step lasts until ``horizon``.
    """

    starts: Tuple[Number, ...]
    rates: Tuple[Number, ...]
    horizon: Number
    _cum: Tuple[Number, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        starts = tuple(self.starts)
        rates = tuple(self.rates)
        object.__setattr__(self, "starts", starts)
        object.__setattr__(self, "rates", rates)
        if not starts or len(starts) != len(rates):
            raise ConfigurationError("timeline needs one rate per step and at least one step")
        if starts[0] != 0:
            raise ConfigurationError(f"first step must start at 0, got {starts[0]}")
        for a, b in zip(starts, starts[1:]):
            if not b > a:
                raise ConfigurationError(f"step starts must be strictly increasing ({a} then {b})")
        if any(r < 0 for r in rates):
            raise ConfigurationError("rates must be nonnegative")
        if self.horizon < starts[-1] or self.horizon <= 0:
            raise ConfigurationError(f"horizon {self.horizon} does not cover the last step")
        cum = [0]
        for k in range(1, len(starts)):
            cum.append(cum[-1] + rates[k - 1] * (starts[k] - starts[k - 1]))
        object.__setattr__(self, "_cum", tuple(cum))

    @classmethod
    def constant(cls, rate: Number, horizon: Number) -> "BandwidthTimeline":
        return cls((0,), (rate,), horizon)

    @classmethod
    def from_rates(cls, rates: Sequence[Number], dwell: Number) -> "BandwidthTimeline":
        """One step of length ``dwell`` per entry of ``rates``."""
        return cls(tuple(k * dwell for k in range(len(rates))), tuple(rates), len(rates) * dwell)

    @property
    def steps(self) -> Tuple[Tuple[Number, Number], ...]:
        return tuple(zip(self.starts, self.rates))

    def index_at(self, t: Number) -> int:
        return bisect.bisect_right(self.starts, t) - 1

    def rate_at(self, t: Number) -> Number:
        if t < 0 or t > self.horizon:
            raise RangeError(f"t={t} outside [0, {self.horizon}]")
        return self.rates[self.index_at(t)]

    def integral_to(self, t: Number) -> Number:
        """Volume delivered over ``[0, t]``."""
        if t < 0 or t > self.horizon:
            raise RangeError(f"t={t} outside [0, {self.horizon}]")
        k = self.index_at(t)
        return self._cum[k] + self.rates[k] * (t - self.starts[k])

    def cumulative(self, start: Number, end: Number) -> Number:
        if not 0 <= start <= end <= self.horizon:
            raise RangeError(f"interval [{start}, {end}] outside [0, {self.horizon}]")
        if start == end:
            return 0
        return self.integral_to(end) - self.integral_to(start)

    def min_rate(self, start: Number, end: Number) -> Number:
        """Smallest rate taken anywhere on ``[start, end)``."""
        if not 0 <= start <= end <= self.horizon:
            raise RangeError(f"interval [{start}, {end}] outside [0, {self.horizon}]")
        i = self.index_at(start)
        j = max(i, bisect.bisect_left(self.starts, end) - 1)
        return min(self.rates[i : j + 1])

    def tiled(self, duration: Number) -> "BandwidthTimeline":
        """Repeat the timeline end to end until it covers ``duration``."""
        if duration <= self.horizon:
            return self
        copies = math.ceil(duration / self.horizon)
        starts, rates = [], []
        for c in range(copies):
            offset = c * self.horizon
            starts.extend(s + offset for s in self.starts)
            rates.extend(self.rates)
        return BandwidthTimeline(tuple(starts), tuple(rates), copies * self.horizon)


def cumulative(timeline: BandwidthTimeline, start: Number, end: Number) -> Number:
    """Exact volume the hop can carry over ``[start, end]``."""
    return timeline.cumulative(start, end)


def unused_capacity(
    core: BandwidthTimeline, edge: BandwidthTimeline, start: Number, end: Number
) -> Number:
    """Core volume beyond what the edge could drain over ``[start, end]``, floored at 0."""
    surplus = core.cumulative(start, end) - edge.cumulative(start, end)
    return surplus if surplus > 0 else 0


@dataclass(frozen=True)
class MarkovBandwidthModel:
    """Discrete-time birth-death chain over bandwidth states."""

    transition_matrix: Tuple[Tuple[float, ...], ...]
    state_rates: Tuple[float, ...]
    dwell: float = 2.0
    initial_state: Optional[int] = None
    seed: int = 0

    def __post_init__(self) -> None:
        matrix = tuple(tuple(row) for row in self.transition_matrix)
        object.__setattr__(self, "transition_matrix", matrix)
        object.__setattr__(self, "state_rates", tuple(self.state_rates))
        n = len(matrix)
        if n == 0:
            raise ConfigurationError("transition matrix is empty")
        for i, row in enumerate(matrix):
            if len(row) != n:
                raise ConfigurationError(f"transition matrix row {i} has {len(row)} entries, expected {n}")
            if any(p < 0 for p in row):
                raise ConfigurationError(f"transition matrix row {i} has a negative probability")
            total = math.fsum(row)
            if abs(total - 1.0) > ROW_SUM_TOLERANCE:
                raise ConfigurationError(f"transition matrix row {i} sums to {total:g}, not 1")
            for j, p in enumerate(row):
                if p != 0 and abs(i - j) > 1:
                    raise ConfigurationError(
                        f"transition matrix row {i} allows a jump to non-adjacent state {j}"
                    )
        if len(self.state_rates) != n:
            raise ConfigurationError(
                f"{len(self.state_rates)} state rates for a {n}-state transition matrix"
            )
        if any(r < 0 for r in self.state_rates):
            raise ConfigurationError("state rates must be nonnegative")
        if not self.dwell > 0:
            raise ConfigurationError("dwell must be positive")
        if self.initial_state is not None and not 0 <= self.initial_state < n:
            raise ConfigurationError(f"initial state {self.initial_state} outside 0..{n - 1}")

    @property
    def size(self) -> int:
        return len(self.state_rates)

    @property
    def start_state(self) -> int:
        if self.initial_state is None:
            return (self.size - 1) // 2
        return self.initial_state

    def with_seed(self, seed: int) -> "MarkovBandwidthModel":
        return MarkovBandwidthModel(
            self.transition_matrix, self.state_rates, self.dwell, self.initial_state, seed
        )

    def states(self, epochs: int) -> np.ndarray:
        """State index for each of ``epochs`` consecutive dwell periods."""
        rng = np.random.default_rng(self.seed)
        draws = rng.random(epochs)
        cdf = np.cumsum(np.asarray(self.transition_matrix, dtype=float), axis=1)
        cdf[:, -1] = np.inf
        out = np.empty(epochs, dtype=np.int64)
        state = self.start_state
        for k in range(epochs):
            if k:
                state = int(np.searchsorted(cdf[state], draws[k], side="right"))
            out[k] = state
        return out


def generate_markov_timeline(model: MarkovBandwidthModel, duration: float) -> BandwidthTimeline:
    """Sample one realisation covering at least ``duration`` seconds.

    The chain moves once per dwell period; the same seed always yields the
    same sequence, and a longer duration extends it without changing the
    prefix.
    """
    if not duration > 0:
        raise ConfigurationError("duration must be positive")
    epochs = math.ceil(duration / model.dwell)
    states = model.states(epochs)
    rates = [model.state_rates[s] for s in states]
    return BandwidthTimeline.from_rates(rates, model.dwell)


# Wireless (edge) and core chains of the evaluation setup. The printed
# matrices round 1/3 to 0.33; exact thirds keep the rows stochastic.
_T = 1.0 / 3.0
PAPER_EDGE_MATRIX = (
    (0.5, 0.5, 0.0, 0.0, 0.0, 0.0),
    (_T, _T, _T, 0.0, 0.0, 0.0),
    (0.0, _T, _T, _T, 0.0, 0.0),
    (0.0, 0.0, _T, _T, _T, 0.0),
    (0.0, 0.0, 0.0, 0.4, 0.4, 0.2),
    (0.0, 0.0, 0.0, 0.0, 0.7, 0.3),
)
PAPER_EDGE_RATES = (100.0, 300.0, 500.0, 700.0, 900.0, 2300.0)
PAPER_CORE_MATRIX = (
    (0.5, 0.5, 0.0, 0.0, 0.0, 0.0),
    (_T, _T, _T, 0.0, 0.0, 0.0),
    (0.0, _T, _T, _T, 0.0, 0.0),
    (0.0, 0.0, _T, _T, _T, 0.0),
    (0.0, 0.0, 0.0, _T, _T, _T),
    (0.0, 0.0, 0.0, 0.0, 0.5, 0.5),
)
PAPER_CORE_RATES = (700.0, 900.0, 1100.0, 1100.0, 1100.0, 1300.0)
PAPER_TRACE_CORE_RATES = (1000.0, 1200.0, 1400.0, 1600.0, 1800.0, 2000.0)


@dataclass(frozen=True)
class TraceSource:
    samples: Tuple[Tuple[float, float], ...]
    origin: str = ""

    def __post_init__(self) -> None:
        samples = tuple((float(t), float(r)) for t, r in self.samples)
        object.__setattr__(self, "samples", samples)
        for (a, _), (b, _) in zip(samples, samples[1:]):
            if not b > a:
                raise IngestionError(f"trace timestamps must be strictly increasing ({a} then {b})")
        if any(r < 0 for _, r in samples):
            raise IngestionError("trace rates must be nonnegative")


def read_trace_csv(path: Union[str, Path]) -> TraceSource:
    """Read a ``time_s,rate_kbps`` CSV; a header row is optional."""
    path = Path(path)
    if not path.is_file():
        raise IngestionError(f"trace file not found: {path}")
    samples = []
    header_seen = False
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
                continue
            try:
                t, r = float(row[0]), float(row[1])
            except (ValueError, IndexError):
                if not samples and not header_seen:
                    header_seen = True
                    continue
                raise IngestionError(f"{path}:{lineno}: expected 'time_s,rate_kbps', got {row!r}")
            samples.append((t, r))
    return TraceSource(tuple(samples), origin=str(path))


def load_trace(source: TraceSource, quantization: float) -> BandwidthTimeline:
    """Quantise a sampled trace into a piecewise-constant timeline.

    Each sample holds its rate until the next one. A bucket's rate is the
    time-weighted mean of that held signal over the bucket, so a bucket
    without samples carries the previous rate forward. Times are shifted so
    the first sample sits at 0; the last sample is held to the end of its
    bucket.
    """
    samples = source.samples
    if len(samples) < 2:
        raise IngestionError("a trace needs at least two samples")
    if not quantization > 0:
        raise IngestionError("quantization must be positive")
    t0 = samples[0][0]
    times = [t - t0 for t, _ in samples]
    rates = [r for _, r in samples]
    buckets = int(math.floor(times[-1] / quantization)) + 1
    horizon = buckets * quantization
    volume = [0.0] * buckets
    edges = times[1:] + [horizon]
    for t_a, t_b, rate in zip(times, edges, rates):
        k = int(math.floor(t_a / quantization))
        while t_a < t_b and k < buckets:
            bucket_end = (k + 1) * quantization
            piece_end = min(bucket_end, t_b)
            volume[k] += rate * (piece_end - t_a)
            t_a = piece_end
            k += 1
    return BandwidthTimeline(
        tuple(k * quantization for k in range(buckets)),
        tuple(v / quantization for v in volume),
        horizon,
    )


def sample_hold_volume(source: TraceSource) -> float:
    """Volume of the held trace signal between its first and last samples."""
    s = source.samples
    return math.fsum(rate * (t_next - t) for (t, rate), (t_next, _) in zip(s, s[1:]))


def write_timeline_csv(timeline: BandwidthTimeline, path: Union[str, Path]) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["start_s", "rate_kbps"])
        for start, rate in timeline.steps:
            writer.writerow([repr(float(start)), repr(float(rate))])

