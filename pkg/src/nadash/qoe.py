"""Session QoE: logarithmic segment quality minus asymmetric switch penalties."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .errors import ConfigurationError, DomainError


@dataclass(frozen=True)
class QoeParams:
    alpha: float = 1.0
    beta: float = 1.0
    eta_up: float = 0.1
    gamma_down: float = 1.0
    # Only the pairwise (previous segment) penalty is defined; values above 1
    # are accepted and behave like 1.
    memory_window: int = 1

    def __post_init__(self) -> None:
        if not self.alpha > 0 or not self.beta > 0:
            raise ConfigurationError("alpha and beta must be positive")
        if self.eta_up < 0 or self.gamma_down < 0:
            raise ConfigurationError("switch penalty factors must be nonnegative")
        if self.memory_window < 1:
            raise ConfigurationError("memory_window must be at least 1")


@dataclass(frozen=True)
class CostParams:
    bandwidth_price: float = 0.0
    """Utility charged per kbit moved over the core."""
    storage_price: float = 0.0
    """Utility charged per kbit*s held in the edge cache."""
    enabled: bool = False

    def __post_init__(self) -> None:
        if self.bandwidth_price < 0 or self.storage_price < 0:
            raise ConfigurationError("prices must be nonnegative")


@dataclass(frozen=True)
class QualitySequence:
    qualities: tuple
    bitrates: tuple

    def __post_init__(self) -> None:
        object.__setattr__(self, "qualities", tuple(self.qualities))
        object.__setattr__(self, "bitrates", tuple(self.bitrates))
        if len(self.qualities) != len(self.bitrates):
            raise DomainError("qualities and bitrates differ in length")

    @classmethod
    def from_bitrates(
        cls, bitrates: Sequence[float], min_bitrate: float, params: QoeParams
    ) -> "QualitySequence":
        return cls(tuple(segment_quality(b, min_bitrate, params) for b in bitrates), tuple(bitrates))

    def __len__(self) -> int:
        return len(self.qualities)


def segment_quality(bitrate: float, min_bitrate: float, params: QoeParams) -> float:
    if not bitrate > 0 or not min_bitrate > 0:
        raise DomainError(f"bitrates must be positive (got {bitrate}, {min_bitrate})")
    return params.alpha * math.log(params.beta * bitrate / min_bitrate)


def switch_penalty(prev_quality: float, next_quality: float, params: QoeParams) -> float:
    delta = next_quality - prev_quality
    if delta >= 0:
        return params.eta_up * delta
    return -params.gamma_down * delta


def path_utility(
    seq: Union[QualitySequence, Sequence[float]],
    params: QoeParams,
    prev_quality: Optional[float] = None,
) -> float:
    """Sum of ``q_k - v_k`` over the sequence.

    ``prev_quality`` is the quality of the segment played just before the
    sequence; without it the first segment carries no penalty.
    """
    qualities = seq.qualities if isinstance(seq, QualitySequence) else tuple(seq)
    if not qualities:
        raise DomainError("cannot score an empty sequence")
    total = 0.0
    prev = prev_quality
    for q in qualities:
        total += q
        if prev is not None:
            total -= switch_penalty(prev, q, params)
        prev = q
    return total


def path_cost(path, params: CostParams) -> float:
    """Operator cost of a schedule: data moved plus cache residency.

    ``path`` needs ``entries`` with a ``size`` (kbit) each and a ``storage``
    attribute holding the integral of cache occupancy over time.
    """
    if not params.enabled:
        return 0.0
    volume = math.fsum(entry.size for entry in path.entries)
    return params.bandwidth_price * volume + params.storage_price * path.storage


def count_switches(bitrates: Sequence[float]) -> tuple:
    """``(up, down)`` switch counts along a bitrate sequence."""
    up = down = 0
    for a, b in zip(bitrates, bitrates[1:]):
        if b > a:
            up += 1
        elif b < a:
            down += 1
    return up, down
