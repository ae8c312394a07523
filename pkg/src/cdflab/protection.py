"""The two-state protection-availability process.

Protections alternate between functional (flag 1) and failed (flag 0)
according to renewal durations, and can additionally be destroyed by an
arriving initiating event (the coupling channel). The flag is recorded with
left-limit discipline: the value an arrival sees is the value just before
any effect of that same arrival. An arrival never repairs failed
protections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .rng import Distribution, RngStream, sample_duration

__all__ = [
    "ProtectionModel",
    "ProtectionState",
    "initial_protection_state",
    "schedule_transition",
    "apply_arrival_coupling",
]


@dataclass(frozen=True)
class ProtectionModel:
    """Up/down duration laws plus the arrival-coupling probability.

    ``coupling_q`` is the probability that an initiating event arriving to
    find protections functional destroys them. ``always_down`` models the
    degenerate no-protection case with a dedicated flag; zero-length up
    durations are rejected because they would schedule transitions forever
    at a single instant.
    """

    up_duration: Distribution
    down_duration: Distribution
    coupling_q: float = 0.0
    always_down: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.coupling_q <= 1.0:
            raise ValueError(f"coupling_q must be in [0, 1], got {self.coupling_q}")
        for name, dist in (("up", self.up_duration), ("down", self.down_duration)):
            if dist.kind == "deterministic" and dist.value == 0.0 and not self.always_down:
                raise ValueError(
                    f"deterministic({name}=0) would loop on instantaneous transitions; "
                    "use always_down=True for permanently failed protections"
                )

    @classmethod
    def never_failing(cls) -> "ProtectionModel":
        """Protections that stay functional past any finite horizon."""
        huge = Distribution.deterministic(math.inf)
        return cls(up_duration=huge, down_duration=huge, coupling_q=0.0)

    @classmethod
    def permanently_failed(cls) -> "ProtectionModel":
        placeholder = Distribution.deterministic(math.inf)
        return cls(up_duration=placeholder, down_duration=placeholder, always_down=True)


@dataclass
class ProtectionState:
    """Left-limit flag plus the absolute time of the next endogenous switch."""

    flag: int
    next_transition: float


def initial_protection_state(model: ProtectionModel, now: float, stream: RngStream) -> ProtectionState:
    """State at the start of a trajectory: functional unless ``always_down``."""
    if model.always_down:
        return ProtectionState(flag=0, next_transition=math.inf)
    state = ProtectionState(flag=1, next_transition=math.inf)
    return schedule_transition(model, state, now, stream)


def schedule_transition(
    model: ProtectionModel, state: ProtectionState, now: float, stream: RngStream
) -> ProtectionState:
    """Draw the residence time in the current state and set the next switch."""
    if model.always_down:
        state.next_transition = math.inf
        return state
    dist = model.up_duration if state.flag == 1 else model.down_duration
    state.next_transition = now + sample_duration(dist, stream)
    return state


def apply_arrival_coupling(
    model: ProtectionModel, state: ProtectionState, now: float, stream: RngStream
) -> tuple[ProtectionState, bool]:
    """Resolve the coupling channel at an initiating-event epoch.

    Must be called after the left-limit flag has been recorded. If the flag
    is up, the arrival destroys protections with probability ``coupling_q``,
    discarding the in-progress up duration and drawing a fresh repair time.
    A failed flag is never repaired by an arrival.
    """
    if state.flag == 1 and model.coupling_q > 0.0:
        if stream.generator.random() < model.coupling_q:
            state.flag = 0
            state.next_transition = now + sample_duration(model.down_duration, stream)
            return state, True
    return state, False
