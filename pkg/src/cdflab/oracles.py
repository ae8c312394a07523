"""Independent reference values for tests and acceptance checks.

Closed forms cover the exponentially-distributed two-state protection
process with constant or state-switched arrival rates; everything else is
handled by seed-pinned brute-force Monte Carlo.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from .intensity import HawkesIntensity, PoissonIntensity, StateModulatedIntensity
from .simulator import Scenario, simulate

__all__ = [
    "MarkovScenarioParams",
    "MarkovCdfResult",
    "UnsupportedScenario",
    "markov_cdf",
    "markov_cdf_from_scenario",
    "hawkes_stationary_rate",
    "brute_force_cdf",
]


class UnsupportedScenario(ValueError):
    """Raised when no closed form exists for the requested scenario."""


@dataclass(frozen=True)
class MarkovScenarioParams:
    """Exponential up/down protection with constant or flag-switched arrivals.

    For a constant arrival rate set ``rate_up == rate_down``. ``mu_f`` is the
    endogenous failure rate (1 / mean up time), ``mu_r`` the repair rate, and
    ``q`` the arrival-coupling probability.
    """

    rate_up: float
    rate_down: float
    mu_f: float
    mu_r: float
    q: float = 0.0

    def __post_init__(self) -> None:
        for name in ("rate_up", "rate_down", "mu_f", "mu_r"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if not 0.0 <= self.q <= 1.0:
            raise ValueError(f"q must be in [0, 1], got {self.q}")

    @classmethod
    def constant_rate(cls, rate: float, mu_f: float, mu_r: float, q: float = 0.0):
        return cls(rate_up=rate, rate_down=rate, mu_f=mu_f, mu_r=mu_r, q=q)


@dataclass(frozen=True)
class MarkovCdfResult:
    true_cdf: float
    rasmussen_cdf: float
    unavailability: float


def markov_cdf(params: MarkovScenarioParams) -> MarkovCdfResult:
    """Exact long-run rates from the two-state balance equations.

    The protection flag is a continuous-time Markov chain: arrivals in the
    up state occur at ``rate_up`` and destroy protections with probability
    ``q``, so the effective up-to-down rate is ``mu_f + q * rate_up``. The
    true damage rate is the stationary expectation of the damage hazard,
    ``rate_down * P(down)``; the rate-times-unavailability estimate uses the
    stationary mean arrival rate instead.
    """
    fail = params.mu_f + params.q * params.rate_up
    p_down = fail / (fail + params.mu_r)
    p_up = 1.0 - p_down
    true_cdf = params.rate_down * p_down
    mean_rate = params.rate_up * p_up + params.rate_down * p_down
    return MarkovCdfResult(true_cdf=true_cdf,
                           rasmussen_cdf=mean_rate * p_down,
                           unavailability=p_down)


def markov_cdf_from_scenario(scenario: Scenario) -> MarkovCdfResult:
    """Map a Scenario onto the closed form, if one exists."""
    prot = scenario.protection
    if prot.always_down:
        raise UnsupportedScenario("no closed form for permanently failed protections")
    if prot.up_duration.kind != "exponential" or prot.down_duration.kind != "exponential":
        raise UnsupportedScenario("closed form requires exponential up/down durations")
    model = scenario.intensity
    if isinstance(model, PoissonIntensity):
        if model.mixture is not None:
            raise UnsupportedScenario("no closed form for rate mixtures")
        rate_up = rate_down = model.rate
    elif isinstance(model, StateModulatedIntensity):
        rate_up, rate_down = model.rate_up, model.rate_down
    else:
        raise UnsupportedScenario("no closed form for self-exciting arrivals")
    return markov_cdf(MarkovScenarioParams(
        rate_up=rate_up, rate_down=rate_down,
        mu_f=prot.up_duration.rate, mu_r=prot.down_duration.rate,
        q=prot.coupling_q))


def hawkes_stationary_rate(mu: float, alpha: float, beta: float) -> float:
    """Long-run arrival rate mu / (1 - alpha/beta) of a stationary
    self-exciting stream."""
    model = HawkesIntensity(mu=mu, alpha=alpha, beta=beta)  # validates stationarity
    return model.mu / (1.0 - model.branching_ratio)


def _bf_worker(args) -> list[float]:
    scenario, indices = args
    return [simulate(scenario, i, checkpoints=None).n_damage / scenario.horizon
            for i in indices]


def brute_force_cdf(scenario: Scenario, replications: int, pilot_seed: int,
                    workers: int = 1) -> tuple[float, float]:
    """Pooled damage rate and its standard error over fresh replications.

    The ground-truth oracle for scenarios with no closed form; results are
    deterministic in ``pilot_seed``.
    """
    if replications < 100:
        raise ValueError(f"brute-force oracle needs >= 100 replications, got {replications}")
    pinned = replace(scenario, base_seed=pilot_seed)
    if workers > 1:
        chunks = [(pinned, range(w, replications, workers)) for w in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_bf_worker, chunks))
        values: list[float] = []
        for w in range(workers):
            values.extend(parts[w])
    else:
        values = _bf_worker((pinned, range(replications)))
    mean = math.fsum(values) / replications
    var = math.fsum((v - mean) ** 2 for v in values) / (replications - 1)
    return mean, math.sqrt(var / replications)
