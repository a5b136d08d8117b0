"""Run configuration: an INI file with one section per concern.

Sections and keys (defaults in brackets)::

    [run]        policy [both], seed [0], repetitions [5], output_dir [results],
                 jobs [1], per_segment_log [false], emit_timelines [false]
    [video]      segments [150], segment_duration [2], ladder [100, 400, 1000]
    [qoe]        alpha [1], beta [1], eta_up [0.1], gamma_down [1], memory_window [1]
    [cost]       enabled [false], bandwidth_price [0], storage_price [0]
    [scheduler]  window [10], holdback [4], max_downswitches [none],
                 prune_floor [false], bound_pruning [true], force_first_min [true],
                 cache_capacity [inf]
    [baseline]   history_k [5], buffer_limit [20], safety_factor [1]
    [core], [edge]
                 source = markov | trace | constant
                 markov:   matrix (rows split by ';', entries by spaces, fractions
                           such as 1/3 allowed), rates, dwell [2], initial_state
                 trace:    path (relative to the config file), quantization [1],
                           randomize_offset [true]
                 constant: rate
    [sweep]      buffer_values, window_values (comma lists; either may be empty)

``NADASH_SEED`` and ``NADASH_OUTPUT_DIR`` override the seed and output
directory.
"""

from __future__ import annotations

import configparser
import math
import os
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from .bandwidth import BandwidthTimeline, MarkovBandwidthModel, load_trace, read_trace_csv
from .baseline import BaselineConfig
from .errors import ConfigurationError, IngestionError
from .manifest import VideoManifest, buffer_capacity
from .qoe import CostParams, QoeParams
from .scheduler import SchedulerConfig
from .simcore import POLICIES, FixedSource, MarkovSource, Scenario, TimelineSource, TraceTimelineSource

SEED_ENV = "NADASH_SEED"
OUTPUT_ENV = "NADASH_OUTPUT_DIR"

SECTIONS = ("run", "video", "qoe", "cost", "scheduler", "baseline", "core", "edge", "sweep")
KEYS = {
    "run": {"policy", "seed", "repetitions", "output_dir", "jobs", "per_segment_log", "emit_timelines"},
    "video": {"segments", "segment_duration", "ladder"},
    "qoe": {"alpha", "beta", "eta_up", "gamma_down", "memory_window"},
    "cost": {"enabled", "bandwidth_price", "storage_price"},
    "scheduler": {
        "window", "holdback", "max_downswitches", "prune_floor", "bound_pruning",
        "force_first_min", "cache_capacity",
    },
    "baseline": {"history_k", "buffer_limit", "safety_factor"},
    "core": {"source", "matrix", "rates", "dwell", "initial_state", "path", "quantization", "randomize_offset", "rate"},
    "sweep": {"buffer_values", "window_values"},
}
KEYS["edge"] = KEYS["core"]


@dataclass(frozen=True)
class HopSpec:
    """Where one hop's bandwidth comes from."""

    source: str
    model: Optional[MarkovBandwidthModel] = None
    trace_path: Optional[Path] = None
    quantization: float = 1.0
    randomize_offset: bool = True
    rate: Optional[float] = None

    def build(self) -> TimelineSource:
        if self.source == "markov":
            return MarkovSource(self.model)
        if self.source == "trace":
            timeline = load_trace(read_trace_csv(self.trace_path), self.quantization)
            return TraceTimelineSource(timeline, self.randomize_offset)
        return FixedSource(BandwidthTimeline.constant(self.rate, 1.0))

    def describe(self) -> Dict[str, str]:
        out = {"source": self.source}
        if self.source == "markov":
            out["matrix"] = "; ".join(" ".join(_num(p) for p in row) for row in self.model.transition_matrix)
            out["rates"] = ", ".join(_num(r) for r in self.model.state_rates)
            out["dwell"] = _num(self.model.dwell)
            out["initial_state"] = str(self.model.start_state)
        elif self.source == "trace":
            out["path"] = str(self.trace_path)
            out["quantization"] = _num(self.quantization)
            out["randomize_offset"] = str(self.randomize_offset).lower()
        else:
            out["rate"] = _num(self.rate)
        return out


@dataclass(frozen=True)
class RunConfig:
    policies: Tuple[str, ...] = POLICIES
    seed: int = 0
    repetitions: int = 5
    output_dir: Path = Path("results")
    jobs: int = 1
    per_segment_log: bool = False
    emit_timelines: bool = False
    manifest: VideoManifest = field(default_factory=lambda: VideoManifest(150, (100.0, 400.0, 1000.0)))
    qoe: QoeParams = field(default_factory=QoeParams)
    cost: CostParams = field(default_factory=CostParams)
    scheduler: SchedulerConfig = field(default_factory=SchedulerConfig)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    core: HopSpec = field(default_factory=lambda: HopSpec("constant", rate=1000.0))
    edge: HopSpec = field(default_factory=lambda: HopSpec("constant", rate=1000.0))
    buffer_values: Tuple[float, ...] = ()
    window_values: Tuple[float, ...] = ()

    @property
    def seeds(self) -> List[int]:
        return [self.seed + r for r in range(self.repetitions)]

    def scenario(self) -> Scenario:
        return Scenario(
            manifest=self.manifest,
            core=self.core.build(),
            edge=self.edge.build(),
            buffer_limit=self.baseline.buffer_limit,
            scheduler=replace(self.scheduler, qoe=self.qoe, cost=self.cost),
            baseline=self.baseline,
        )

    def effective(self) -> Dict[str, Dict[str, str]]:
        """Every setting as it will be used, section by section."""
        sch = self.scheduler
        return {
            "run": {
                "policy": "both" if set(self.policies) == set(POLICIES) else self.policies[0],
                "seed": str(self.seed),
                "repetitions": str(self.repetitions),
                "output_dir": str(self.output_dir),
                "jobs": str(self.jobs),
                "per_segment_log": str(self.per_segment_log).lower(),
                "emit_timelines": str(self.emit_timelines).lower(),
            },
            "video": {
                "segments": str(self.manifest.segment_count),
                "segment_duration": _num(self.manifest.segment_duration),
                "ladder": ", ".join(_num(b) for b in self.manifest.ladder),
            },
            "qoe": {k: _num(v) for k, v in asdict(self.qoe).items()},
            "cost": {
                "enabled": str(self.cost.enabled).lower(),
                "bandwidth_price": _num(self.cost.bandwidth_price),
                "storage_price": _num(self.cost.storage_price),
            },
            "scheduler": {
                "window": _num(sch.window),
                "holdback": _num(sch.interleave_holdback),
                "max_downswitches": "none" if sch.max_downswitches is None else str(sch.max_downswitches),
                "prune_floor": str(sch.prune_floor).lower(),
                "bound_pruning": str(sch.bound_pruning).lower(),
                "force_first_min": str(sch.force_first_min).lower(),
                "cache_capacity": _num(sch.cache_capacity),
            },
            "baseline": {k: _num(v) for k, v in asdict(self.baseline).items()},
            "core": self.core.describe(),
            "edge": self.edge.describe(),
            "sweep": {
                "buffer_values": ", ".join(_num(v) for v in self.buffer_values),
                "window_values": ", ".join(_num(v) for v in self.window_values),
            },
        }


def _num(x: float) -> str:
    x = float(x)
    if math.isinf(x):
        return "inf"
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def parse_number(text: str, what: str) -> float:
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError):
        if text.strip().lower() in ("inf", "infinity"):
            return float("inf")
        raise ConfigurationError(f"{what}: {text.strip()!r} is not a number") from None


def parse_list(text: str, what: str) -> Tuple[float, ...]:
    items = [t for t in text.replace(",", " ").split() if t]
    return tuple(parse_number(t, what) for t in items)


def parse_matrix(text: str, what: str) -> Tuple[Tuple[float, ...], ...]:
    rows = [r for r in text.split(";") if r.strip()]
    if not rows:
        raise ConfigurationError(f"{what}: empty matrix")
    return tuple(parse_list(r, what) for r in rows)


class _Section:
    def __init__(self, parser: configparser.ConfigParser, name: str):
        self.name = name
        self.data = parser[name] if parser.has_section(name) else {}

    def has(self, key: str) -> bool:
        return key in self.data and self.data[key].strip() != ""

    def text(self, key: str, default: str) -> str:
        return self.data[key].strip() if self.has(key) else default

    def number(self, key: str, default: float) -> float:
        return parse_number(self.data[key], f"[{self.name}] {key}") if self.has(key) else default

    def integer(self, key: str, default: int) -> int:
        if not self.has(key):
            return default
        value = self.number(key, default)
        if value != int(value):
            raise ConfigurationError(f"[{self.name}] {key}: expected an integer, got {self.data[key]!r}")
        return int(value)

    def flag(self, key: str, default: bool) -> bool:
        if not self.has(key):
            return default
        raw = self.data[key].strip().lower()
        if raw in ("1", "true", "yes", "on"):
            return True
        if raw in ("0", "false", "no", "off"):
            return False
        raise ConfigurationError(f"[{self.name}] {key}: expected true or false, got {raw!r}")

    def values(self, key: str, default: Tuple[float, ...] = ()) -> Tuple[float, ...]:
        return parse_list(self.data[key], f"[{self.name}] {key}") if self.has(key) else default


def _hop(section: _Section, base_dir: Path) -> HopSpec:
    source = section.text("source", "")
    where = f"[{section.name}]"
    if source == "markov":
        for key in ("matrix", "rates"):
            if not section.has(key):
                raise ConfigurationError(f"{where} markov source needs '{key}'")
        initial = section.integer("initial_state", -1)
        model = MarkovBandwidthModel(
            transition_matrix=parse_matrix(section.data["matrix"], f"{where} matrix"),
            state_rates=section.values("rates"),
            dwell=section.number("dwell", 2.0),
            initial_state=None if initial < 0 else initial,
        )
        return HopSpec("markov", model=model)
    if source == "trace":
        if not section.has("path"):
            raise ConfigurationError(f"{where} trace source needs 'path'")
        path = Path(section.data["path"].strip())
        if not path.is_absolute():
            path = base_dir / path
        if not path.is_file():
            raise ConfigurationError(f"{where} trace file not found: {path}")
        spec = HopSpec(
            "trace",
            trace_path=path,
            quantization=section.number("quantization", 1.0),
            randomize_offset=section.flag("randomize_offset", True),
        )
        if not spec.quantization > 0:
            raise ConfigurationError(f"{where} quantization must be positive")
        try:
            load_trace(read_trace_csv(path), spec.quantization)
        except IngestionError as exc:
            raise ConfigurationError(f"{where} {exc}") from exc
        return spec
    if source == "constant":
        rate = section.number("rate", -1.0)
        if rate < 0:
            raise ConfigurationError(f"{where} constant source needs a nonnegative 'rate'")
        return HopSpec("constant", rate=rate)
    raise ConfigurationError(f"{where} source must be markov, trace or constant, got {source!r}")


def parse_config(text: str, base_dir: Union[str, Path] = ".", env: Optional[Dict[str, str]] = None) -> RunConfig:
    """Parse and validate a configuration; every problem raises ``ConfigurationError``."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed configuration: {exc}") from exc
    for name in parser.sections():
        if name not in SECTIONS:
            raise ConfigurationError(f"unknown section [{name}]")
        unknown = set(parser[name]) - KEYS[name]
        if unknown:
            raise ConfigurationError(f"[{name}] unknown keys: {', '.join(sorted(unknown))}")
    for hop in ("core", "edge"):
        if not parser.has_section(hop):
            raise ConfigurationError(f"missing section [{hop}]")
    env = os.environ if env is None else env
    base_dir = Path(base_dir)
    s = {name: _Section(parser, name) for name in SECTIONS}

    run, video = s["run"], s["video"]
    policy = run.text("policy", "both")
    if policy == "both":
        policies = POLICIES
    elif policy in POLICIES:
        policies = (policy,)
    else:
        raise ConfigurationError(f"[run] policy must be both, {' or '.join(POLICIES)}; got {policy!r}")
    seed = run.integer("seed", 0)
    if env.get(SEED_ENV):
        seed = int(env[SEED_ENV])
    output_dir = Path(env.get(OUTPUT_ENV) or run.text("output_dir", "results"))
    repetitions = run.integer("repetitions", 5)
    if repetitions < 1:
        raise ConfigurationError("[run] repetitions must be at least 1")
    jobs = run.integer("jobs", 1)
    if jobs < 1:
        raise ConfigurationError("[run] jobs must be at least 1")

    manifest = VideoManifest(
        segment_count=video.integer("segments", 150),
        ladder=video.values("ladder", (100.0, 400.0, 1000.0)),
        segment_duration=video.number("segment_duration", 2.0),
    )
    q = s["qoe"]
    qoe = QoeParams(
        alpha=q.number("alpha", 1.0),
        beta=q.number("beta", 1.0),
        eta_up=q.number("eta_up", 0.1),
        gamma_down=q.number("gamma_down", 1.0),
        memory_window=q.integer("memory_window", 1),
    )
    c = s["cost"]
    cost = CostParams(
        bandwidth_price=c.number("bandwidth_price", 0.0),
        storage_price=c.number("storage_price", 0.0),
        enabled=c.flag("enabled", False),
    )
    sc = s["scheduler"]
    downs = sc.text("max_downswitches", "none")
    scheduler = SchedulerConfig(
        window=sc.number("window", 10.0),
        interleave_holdback=sc.number("holdback", 4.0),
        max_downswitches=None if downs.lower() == "none" else sc.integer("max_downswitches", 0),
        prune_floor=sc.flag("prune_floor", False),
        bound_pruning=sc.flag("bound_pruning", True),
        force_first_min=sc.flag("force_first_min", True),
        cache_capacity=sc.number("cache_capacity", float("inf")),
        qoe=qoe,
        cost=cost,
    )
    b = s["baseline"]
    baseline = BaselineConfig(
        history_k=b.integer("history_k", 5),
        buffer_limit=b.number("buffer_limit", 20.0),
        safety_factor=b.number("safety_factor", 1.0),
    )
    sw = s["sweep"]
    buffer_values = sw.values("buffer_values")
    window_values = sw.values("window_values")
    for value in (baseline.buffer_limit,) + buffer_values:
        buffer_capacity(value, manifest.segment_duration)
    for value in window_values:
        if not value > 0:
            raise ConfigurationError(f"[sweep] window values must be positive, got {value}")
    return RunConfig(
        policies=policies,
        seed=seed,
        repetitions=repetitions,
        output_dir=output_dir,
        jobs=jobs,
        per_segment_log=run.flag("per_segment_log", False),
        emit_timelines=run.flag("emit_timelines", False),
        manifest=manifest,
        qoe=qoe,
        cost=cost,
        scheduler=scheduler,
        baseline=baseline,
        core=_hop(s["core"], base_dir),
        edge=_hop(s["edge"], base_dir),
        buffer_values=buffer_values,
        window_values=window_values,
    )


def load_config(path: Union[str, Path], env: Optional[Dict[str, str]] = None) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"configuration file not found: {path}")
    return parse_config(path.read_text(), path.parent, env)


def render_config(config: RunConfig) -> str:
    """The effective configuration in the same INI format it was read from."""
    lines = []
    for section, items in config.effective().items():
        lines.append(f"[{section}]")
        lines.extend(f"{k} = {v}" for k, v in items.items())
        lines.append("")
    return "\n".join(lines)


def bundled_config(name: str) -> Path:
    """Path of a configuration shipped with the package, e.g. ``paper_case1.cfg``."""
    path = Path(__file__).parent / "configs" / name
    if not path.is_file():
        raise ConfigurationError(f"no bundled configuration named {name!r}")
    return path
