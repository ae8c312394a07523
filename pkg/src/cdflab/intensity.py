"""Conditional intensity models for the initiating-event stream.

Three model families share one contract: pointwise evaluation, a dominating
rate bound for thinning, exact segment integration of the cumulative hazard,
and the self-excitation update applied at accepted events.

A model is immutable; the mutable part of the conditional intensity lives in
:class:`IntensityState`, which is a sufficient statistic for the intensity
given the history up to its anchor epoch (the last event or protection
transition). All operations take time offsets relative to that anchor.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Union

__all__ = [
    "PoissonIntensity",
    "HawkesIntensity",
    "StateModulatedIntensity",
    "IntensityModel",
    "IntensityState",
    "evaluate",
    "upper_bound",
    "integrate_segment",
    "excite",
]


@dataclass(frozen=True)
class PoissonIntensity:
    """Constant-rate arrivals. ``mixture``, if given, lists equally likely
    rates from which each replication draws its own constant rate."""

    rate: float
    mixture: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if not self.rate > 0.0:
            raise ValueError(f"poisson rate must be > 0, got {self.rate}")
        if self.mixture is not None:
            if len(self.mixture) == 0:
                raise ValueError("rate mixture must be non-empty")
            if any(not r > 0.0 for r in self.mixture):
                raise ValueError("all mixture rates must be > 0")


@dataclass(frozen=True)
class HawkesIntensity:
    """Self-exciting intensity mu + sum of alpha * exp(-beta * age) over past
    events. The exponential kernel collapses the history to one scalar."""

    mu: float
    alpha: float
    beta: float
    allow_nonstationary: bool = False

    def __post_init__(self) -> None:
        if not self.mu > 0.0:
            raise ValueError(f"hawkes baseline mu must be > 0, got {self.mu}")
        if self.alpha < 0.0:
            raise ValueError(f"hawkes jump alpha must be >= 0, got {self.alpha}")
        if not self.beta > 0.0:
            raise ValueError(f"hawkes decay beta must be > 0, got {self.beta}")
        if self.alpha / self.beta >= 1.0:
            if not self.allow_nonstationary:
                raise ValueError(
                    "non-stationary Hawkes: branching ratio alpha/beta = "
                    f"{self.alpha / self.beta:g} >= 1; long-run arrival rate diverges"
                )
            warnings.warn(
                "non-stationary Hawkes model requested (alpha/beta >= 1); "
                "the event rate grows without bound and limiting estimators "
                "do not converge",
                stacklevel=2,
            )

    @property
    def branching_ratio(self) -> float:
        return self.alpha / self.beta


@dataclass(frozen=True)
class StateModulatedIntensity:
    """Arrival rate that switches with the protection flag: ``rate_up`` while
    protections are functional, ``rate_down`` while they are failed. Reads
    the left limit of the flag, so the intensity is predictable."""

    rate_up: float
    rate_down: float

    def __post_init__(self) -> None:
        if not self.rate_up > 0.0:
            raise ValueError(f"rate_up must be > 0, got {self.rate_up}")
        if not self.rate_down > 0.0:
            raise ValueError(f"rate_down must be > 0, got {self.rate_down}")


IntensityModel = Union[PoissonIntensity, HawkesIntensity, StateModulatedIntensity]


@dataclass
class IntensityState:
    """Mutable intensity statistics as of the anchor epoch.

    ``excitation`` is the Hawkes kernel sum at the anchor (zero for other
    models); ``protection_flag`` is the left-limit protection indicator.
    Single-owner per replication; models themselves are shareable.
    """

    excitation: float = 0.0
    protection_flag: int = 1

    def __post_init__(self) -> None:
        if self.excitation < 0.0:
            raise ValueError(f"excitation must be >= 0, got {self.excitation}")
        if self.protection_flag not in (0, 1):
            raise ValueError(f"protection_flag must be 0 or 1, got {self.protection_flag}")


def evaluate(model: IntensityModel, state: IntensityState, elapsed: float) -> float:
    """Conditional intensity ``elapsed`` time-units after the anchor epoch,
    assuming no events or transitions since the anchor."""
    if elapsed < 0.0:
        raise ValueError(f"elapsed must be >= 0, got {elapsed}")
    if isinstance(model, PoissonIntensity):
        return model.rate
    if isinstance(model, HawkesIntensity):
        return model.mu + state.excitation * math.exp(-model.beta * elapsed)
    return model.rate_up if state.protection_flag == 1 else model.rate_down


def upper_bound(model: IntensityModel, state: IntensityState) -> float:
    """A rate dominating the intensity until the next event or transition.

    Tight for all three families: constant rates are their own bound, and a
    Hawkes intensity only decays between events.
    """
    if isinstance(model, PoissonIntensity):
        return model.rate
    if isinstance(model, HawkesIntensity):
        return model.mu + state.excitation
    return model.rate_up if state.protection_flag == 1 else model.rate_down


def integrate_segment(model: IntensityModel, state: IntensityState, a: float, b: float) -> float:
    """Exact integral of the intensity over ``[a, b]``.

    Requires ``state`` to be current as of ``a`` and the segment to contain
    no events or protection transitions.
    """
    if a > b:
        raise ValueError(f"segment start {a} exceeds end {b}")
    dt = b - a
    if isinstance(model, PoissonIntensity):
        return model.rate * dt
    if isinstance(model, HawkesIntensity):
        return model.mu * dt + (state.excitation / model.beta) * (-math.expm1(-model.beta * dt))
    rate = model.rate_up if state.protection_flag == 1 else model.rate_down
    return rate * dt


def excite(model: IntensityModel, state: IntensityState, elapsed: float) -> IntensityState:
    """State update at an accepted initiating event ``elapsed`` after the
    anchor: Hawkes excitation decays to the event epoch and jumps by alpha;
    other models are unaffected. Returns the post-event state."""
    if elapsed < 0.0:
        raise ValueError(f"elapsed must be >= 0, got {elapsed}")
    if isinstance(model, HawkesIntensity):
        decayed = state.excitation * math.exp(-model.beta * elapsed)
        return replace(state, excitation=decayed + model.alpha)
    return replace(state)
