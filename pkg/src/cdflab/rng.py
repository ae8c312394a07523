"""Reproducible splittable random streams and duration distributions.

Every stochastic piece of the laboratory draws from an :class:`RngStream`
derived arithmetically from ``(base_seed, stream_index)``, so replication
``i`` can be generated on any worker, in any order, and always produces the
same trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "RngStream",
    "Distribution",
    "derive_stream",
    "sample_duration",
    "sample_durations",
]

_DIST_KINDS = ("exponential", "weibull", "deterministic")


@dataclass
class RngStream:
    """A single-owner random stream identified by ``(base_seed, stream_index)``.

    The underlying generator is counter-based (Philox keyed by a seed
    sequence with ``stream_index`` as the spawn key), so distinct indices
    give statistically independent streams without jump-ahead coordination.
    """

    base_seed: int
    stream_index: int
    generator: np.random.Generator

    def uniform(self) -> float:
        """Next uniform draw on [0, 1)."""
        return float(self.generator.random())

    def exponential(self, rate: float) -> float:
        """Exponential draw via inverse CDF on (0, 1]; never infinite."""
        return -math.log(1.0 - self.generator.random()) / rate


def derive_stream(base_seed: int, stream_index: int) -> RngStream:
    """Derive the stream for one replication from the experiment seed.

    Deterministic: the same ``(base_seed, stream_index)`` always yields a
    bit-identical draw sequence.
    """
    if base_seed < 0:
        raise ValueError(f"base_seed must be nonnegative, got {base_seed}")
    if stream_index < 0:
        raise ValueError(f"stream_index must be nonnegative, got {stream_index}")
    key = np.random.SeedSequence(entropy=base_seed, spawn_key=(stream_index,))
    return RngStream(base_seed, stream_index, np.random.Generator(np.random.Philox(key)))


@dataclass(frozen=True)
class Distribution:
    """A nonnegative duration law: exponential, Weibull, or a point mass.

    Parameters are validated at construction so sampling can never fail.
    Unit conventions: ``rate`` is per time-unit, ``scale`` and ``value``
    are time-units, ``shape`` is dimensionless.
    """

    kind: str
    rate: float = 0.0
    shape: float = 0.0
    scale: float = 0.0
    value: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in _DIST_KINDS:
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if self.kind == "exponential" and not self.rate > 0.0:
            raise ValueError(f"exponential rate must be > 0, got {self.rate}")
        if self.kind == "weibull":
            if not self.shape > 0.0:
                raise ValueError(f"weibull shape must be > 0, got {self.shape}")
            if not self.scale > 0.0:
                raise ValueError(f"weibull scale must be > 0, got {self.scale}")
        if self.kind == "deterministic" and self.value < 0.0:
            raise ValueError(f"deterministic value must be >= 0, got {self.value}")

    @classmethod
    def exponential(cls, rate: float) -> "Distribution":
        return cls(kind="exponential", rate=rate)

    @classmethod
    def weibull(cls, shape: float, scale: float) -> "Distribution":
        return cls(kind="weibull", shape=shape, scale=scale)

    @classmethod
    def deterministic(cls, value: float) -> "Distribution":
        return cls(kind="deterministic", value=value)

    def mean(self) -> float:
        if self.kind == "exponential":
            return 1.0 / self.rate
        if self.kind == "weibull":
            return self.scale * math.gamma(1.0 + 1.0 / self.shape)
        return self.value


def sample_duration(dist: Distribution, stream: RngStream) -> float:
    """Draw one nonnegative, finite duration and advance the stream."""
    if dist.kind == "exponential":
        return stream.exponential(dist.rate)
    if dist.kind == "weibull":
        u = 1.0 - stream.generator.random()
        return dist.scale * (-math.log(u)) ** (1.0 / dist.shape)
    return dist.value


def sample_durations(dist: Distribution, stream: RngStream, n: int) -> np.ndarray:
    """Vectorized :func:`sample_duration`; consumes the same uniform stream."""
    if dist.kind == "deterministic":
        return np.full(n, dist.value)
    u = 1.0 - stream.generator.random(n)
    if dist.kind == "exponential":
        return -np.log(u) / dist.rate
    return dist.scale * (-np.log(u)) ** (1.0 / dist.shape)
