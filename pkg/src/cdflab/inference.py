"""Estimators, pooling, and goodness-of-fit diagnostics for trajectories.

All estimators are functionals of observables only: event epochs, the
left-limit protection flag each arrival saw, and the protection path. The
stochastic intensity itself is never treated as observed. Pooled summaries
use exact (``fsum``) accumulation so results are independent of input
order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .simulator import INITIATING_EVENT, CheckpointGrid, Trajectory, flag_segments

__all__ = [
    "Interval",
    "EstimateReport",
    "DiagnosticsReport",
    "estimate",
    "pool",
    "batch_means_ci",
    "martingale_residual",
    "time_rescaling_test",
    "covariance_bias_curve",
    "one_sided_positive_pvalue",
]

_POOLED_FIELDS = (
    "lambda_hat",
    "p_time",
    "p_palm",
    "cdf_hat",
    "rasmussen_hat",
    "bias_hat",
    "cdf_hat_caused_inclusive",
)

# Small-sample threshold below which the exact KS null distribution is used
# instead of the asymptotic Kolmogorov distribution.
_KS_EXACT_N = 35


@dataclass(frozen=True)
class Interval:
    low: float
    high: float
    level: float


@dataclass
class EstimateReport:
    """Point estimates for one trajectory, or a pooled set of them.

    ``p_palm`` is the fraction of arrivals that found protections failed
    (state sampled at arrival epochs); ``p_time`` is the time-average
    unavailability. ``rasmussen_hat`` is the rate-times-unavailability
    estimate whose gap to ``cdf_hat`` is ``bias_hat``.

    ``cdf_hat_caused_inclusive`` additionally counts arrivals that
    destroyed working protections, regardless of the scenario's damage
    rule, so both accounting conventions are always visible.
    """

    scenario_id: str
    horizon: float
    n_events: int
    n_damage: int
    n_caused_failures: int
    lambda_hat: float
    p_time: float
    p_palm: Optional[float]
    cdf_hat: float
    rasmussen_hat: float
    bias_hat: float
    cdf_hat_caused_inclusive: float
    ci: dict[str, Interval] = field(default_factory=dict)
    undefined: dict[str, str] = field(default_factory=dict)
    n_replications: int = 1
    replication_index: Optional[int] = None

    def to_json_dict(self) -> dict:
        """Serializable form; undefined statistics become null with a reason."""
        out: dict = {
            "scenario_id": self.scenario_id,
            "horizon": self.horizon,
            "n_events": self.n_events,
            "n_damage": self.n_damage,
            "n_caused_failures": self.n_caused_failures,
            "n_replications": self.n_replications,
        }
        for name in _POOLED_FIELDS:
            out[name] = getattr(self, name)
        out["ci"] = {
            name: {"low": iv.low, "high": iv.high, "level": iv.level}
            for name, iv in sorted(self.ci.items())
        }
        out["undefined"] = dict(sorted(self.undefined.items()))
        return out


@dataclass
class DiagnosticsReport:
    """Martingale residual and time-rescaling results for one trajectory.

    Each producing operation fills its own fields and leaves the rest None.
    ``skipped_reason`` marks a rescaling test that did not run (too few
    damage events); it is not a failure.
    """

    m_total: Optional[float] = None
    m_damage: Optional[float] = None
    normalized_damage_residual: Optional[float] = None
    ks_statistic: Optional[float] = None
    ks_p_value: Optional[float] = None
    rescaled_count: Optional[int] = None
    skipped_reason: Optional[str] = None

    def to_json_dict(self) -> dict:
        out = {
            "m_total": self.m_total,
            "m_damage": self.m_damage,
            "normalized_damage_residual": self.normalized_damage_residual,
            "ks_statistic": self.ks_statistic,
            "ks_p_value": self.ks_p_value,
            "rescaled_count": self.rescaled_count,
        }
        if self.skipped_reason is not None:
            out["skipped_reason"] = self.skipped_reason
        return out


def estimate(trajectory: Trajectory) -> EstimateReport:
    """Point estimates from one trajectory.

    With no arrivals the epoch-sampled unavailability is undefined and is
    reported as such, never as 0/0.
    """
    T = trajectory.horizon
    if not T > 0.0:
        raise ValueError("trajectory horizon must be positive")
    n = trajectory.n_events
    lambda_hat = n / T
    p_time = (T - trajectory.uptime_integral) / T
    cdf_hat = trajectory.n_damage / T
    rasmussen_hat = lambda_hat * p_time
    undefined: dict[str, str] = {}
    if n > 0:
        p_palm: Optional[float] = trajectory.n_left_limit_down / n
    else:
        p_palm = None
        undefined["p_palm"] = "no initiating events in the trajectory"
    inclusive = (trajectory.n_left_limit_down + trajectory.n_caused_failures) / T
    return EstimateReport(
        scenario_id=trajectory.scenario.identity(),
        horizon=T,
        n_events=n,
        n_damage=trajectory.n_damage,
        n_caused_failures=trajectory.n_caused_failures,
        lambda_hat=lambda_hat,
        p_time=p_time,
        p_palm=p_palm,
        cdf_hat=cdf_hat,
        rasmussen_hat=rasmussen_hat,
        bias_hat=cdf_hat - rasmussen_hat,
        cdf_hat_caused_inclusive=inclusive,
        undefined=undefined,
        replication_index=trajectory.replication_index,
    )


def _mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values)


def _sd(values: Sequence[float], center: float) -> float:
    if len(values) < 2:
        return 0.0
    return math.sqrt(math.fsum((v - center) ** 2 for v in values) / (len(values) - 1))


def one_sided_positive_pvalue(values: Sequence[float]) -> float:
    """One-sided t-test p-value for the hypothesis that the mean is > 0."""
    n = len(values)
    if n < 2:
        raise ValueError("need at least 2 values for a t-test")
    mean = _mean(values)
    sd = _sd(values, mean)
    if sd == 0.0:
        return 0.0 if mean > 0.0 else 1.0
    t_stat = mean / (sd / math.sqrt(n))
    return float(stats.t.sf(t_stat, df=n - 1))


def pool(reports: Sequence[EstimateReport], weights: Optional[Sequence[float]] = None,
         level: float = 0.95) -> EstimateReport:
    """Horizon-weighted pooled estimates with across-replication t intervals.

    All reports must come from the same scenario. The result is invariant
    under permutations of the input.
    """
    if len(reports) < 2:
        raise ValueError("pooling needs at least 2 reports")
    ids = {r.scenario_id for r in reports}
    if len(ids) != 1:
        raise ValueError(f"cannot pool reports from different scenarios: {sorted(ids)}")
    if weights is None:
        weights = [r.horizon for r in reports]
    if len(weights) != len(reports):
        raise ValueError("one weight per report required")
    if any(not w > 0.0 for w in weights):
        raise ValueError("weights must be positive")
    if not 0.0 < level < 1.0:
        raise ValueError(f"confidence level must be in (0, 1), got {level}")

    wsum = math.fsum(weights)
    pooled_values: dict[str, Optional[float]] = {}
    ci: dict[str, Interval] = {}
    undefined: dict[str, str] = {}
    n_reps = sum(r.n_replications for r in reports)

    for name in _POOLED_FIELDS:
        pairs = [(getattr(r, name), w) for r, w in zip(reports, weights)
                 if getattr(r, name) is not None]
        if not pairs:
            pooled_values[name] = None
            undefined[name] = "undefined in every pooled report"
            continue
        wpart = math.fsum(w for _, w in pairs)
        center = math.fsum(v * w for v, w in pairs) / wpart
        pooled_values[name] = center
        values = [v for v, _ in pairs]
        if len(values) >= 2:
            tq = float(stats.t.ppf(0.5 + level / 2.0, df=len(values) - 1))
            se = _sd(values, _mean(values)) / math.sqrt(len(values))
            ci[name] = Interval(center - tq * se, center + tq * se, level)

    return EstimateReport(
        scenario_id=reports[0].scenario_id,
        horizon=wsum,
        n_events=sum(r.n_events for r in reports),
        n_damage=sum(r.n_damage for r in reports),
        n_caused_failures=sum(r.n_caused_failures for r in reports),
        lambda_hat=pooled_values["lambda_hat"],
        p_time=pooled_values["p_time"],
        p_palm=pooled_values["p_palm"],
        cdf_hat=pooled_values["cdf_hat"],
        rasmussen_hat=pooled_values["rasmussen_hat"],
        bias_hat=pooled_values["bias_hat"],
        cdf_hat_caused_inclusive=pooled_values["cdf_hat_caused_inclusive"],
        ci=ci,
        undefined=undefined,
        n_replications=n_reps,
    )


_BATCH_STATISTICS = ("cdf", "lambda", "p_time")


def batch_means_ci(trajectory: Trajectory, statistic: str, batches: int,
                   level: float = 0.95) -> Optional[Interval]:
    """Single-trajectory t interval from contiguous equal-length time batches.

    Returns None (the undefined-interval marker) when fewer than two batches
    are requested.
    """
    if statistic not in _BATCH_STATISTICS:
        raise ValueError(f"statistic must be one of {_BATCH_STATISTICS}, got {statistic!r}")
    if not 0.0 < level < 1.0:
        raise ValueError(f"confidence level must be in (0, 1), got {level}")
    if batches < 2:
        return None
    T = trajectory.horizon
    width = T / batches

    per_batch = np.zeros(batches)
    if statistic == "p_time":
        for a, b, flag in flag_segments(trajectory):
            if flag == 1:
                continue
            lo = int(a / width)
            hi = min(int(math.ceil(b / width)), batches)
            for k in range(lo, hi):
                left = max(a, k * width)
                right = min(b, (k + 1) * width)
                if right > left:
                    per_batch[k] += right - left
        per_batch /= width
    else:
        for ev in trajectory.events:
            if ev.kind != INITIATING_EVENT:
                continue
            if statistic == "cdf" and not ev.is_damage:
                continue
            k = min(int(ev.time / width), batches - 1)
            per_batch[k] += 1.0
        per_batch /= width

    mean = float(per_batch.mean())
    sd = float(per_batch.std(ddof=1))
    tq = float(stats.t.ppf(0.5 + level / 2.0, df=batches - 1))
    half = tq * sd / math.sqrt(batches)
    return Interval(mean - half, mean + half, level)


def martingale_residual(trajectory: Trajectory) -> DiagnosticsReport:
    """Realized compensated-count residuals at the horizon.

    The damage residual is normalized by the square root of its
    compensator, the natural variance scale for a compensated counting
    process.
    """
    m_total = trajectory.n_events - trajectory.lambda_total
    lamD = trajectory.lambda_damage
    m_damage = trajectory.n_damage - lamD
    if lamD == 0.0:
        if trajectory.n_damage > 0:
            raise RuntimeError(
                "damage events observed with a zero damage compensator: "
                "trajectory is inconsistent with its scenario")
        normalized = 0.0
    else:
        normalized = m_damage / math.sqrt(lamD)
    return DiagnosticsReport(m_total=m_total, m_damage=m_damage,
                             normalized_damage_residual=normalized)


def time_rescaling_test(trajectory: Trajectory,
                        compensator_scale: float = 1.0) -> DiagnosticsReport:
    """KS test of rescaled damage interarrivals against a unit exponential.

    Damage epochs are mapped through the damage compensator; under a
    correctly specified model the increments are iid Exp(1).
    ``compensator_scale`` deliberately misscales the transform and exists
    for power studies of the test itself. Fewer than 10 damage events
    yields a skipped-test marker.
    """
    taus = [lam for ev, lam in zip(trajectory.events, trajectory.event_lambda_damage)
            if ev.is_damage]
    count = len(taus)
    if count < 10:
        return DiagnosticsReport(
            rescaled_count=count,
            skipped_reason=f"only {count} damage events; need >= 10 for the KS test")
    arr = compensator_scale * np.asarray(taus)
    increments = np.diff(arr, prepend=0.0)
    method = "exact" if count < _KS_EXACT_N else "asymp"
    result = stats.kstest(increments, "expon", method=method)
    return DiagnosticsReport(ks_statistic=float(result.statistic),
                             ks_p_value=float(result.pvalue),
                             rescaled_count=count)


def covariance_bias_curve(grids: Sequence[CheckpointGrid]) -> tuple[np.ndarray, np.ndarray]:
    """Finite-horizon bias estimate at each checkpoint, pooled over grids.

    At each grid time the damage rate is compared against the product of
    the pooled arrival rate and pooled unavailability (products of means,
    mirroring the covariance decomposition of the limiting rates). Returns
    ``(times, bias)``.
    """
    if len(grids) < 1:
        raise ValueError("need at least one checkpoint grid")
    times = grids[0].times
    for g in grids[1:]:
        if g.times.shape != times.shape or not np.array_equal(g.times, times):
            raise ValueError("checkpoint grids are not aligned")
    R = len(grids)
    nd = np.zeros_like(times)
    n = np.zeros_like(times)
    down = np.zeros_like(times)
    for g in grids:
        nd += g.n_damage
        n += g.n_events
        down += g.downtime
    mean_cdf = nd / R / times
    mean_rate = n / R / times
    mean_unavail = down / R / times
    return times.copy(), mean_cdf - mean_rate * mean_unavail
