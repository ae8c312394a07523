"""Shared scenario panel for the test suite.

The acceptance-scale runs (T=5000, R=200) are expensive, so each scenario is
simulated once per session and summarized into compact per-replication
records that several test modules share. Trajectories are dropped after
summarizing; every trajectory is replay-checked against the quadrature
oracle on the way through.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pytest

from cdflab import (
    Distribution,
    HawkesIntensity,
    Interval,
    PoissonIntensity,
    ProtectionModel,
    Scenario,
    StateModulatedIntensity,
    batch_means_ci,
    estimate,
    martingale_residual,
    replay_compensator,
    simulate,
    time_rescaling_test,
)
from cdflab.inference import EstimateReport

ACCEPT_T = 5000.0
ACCEPT_R = 200
_WORKERS = 2

SWEEP_ALPHAS = (0.4, 0.8, 1.2)
SWEEP_QS = (0.05, 0.1, 0.2)


def _exp_protection(mu_f: float, mu_r: float, q: float = 0.0) -> ProtectionModel:
    return ProtectionModel(
        up_duration=Distribution.exponential(mu_f),
        down_duration=Distribution.exponential(mu_r),
        coupling_q=q,
    )


def sweep_cell_name(alpha: float, q: float) -> str:
    return f"hawkes_a{alpha:g}_q{q:g}"


def _build_scenarios() -> dict[str, Scenario]:
    scenarios = {
        "pasta": Scenario(
            intensity=PoissonIntensity(rate=2.0),
            protection=_exp_protection(0.1, 10.0),
            horizon=ACCEPT_T,
            base_seed=240101,
        ),
        "coupled_poisson": Scenario(
            intensity=PoissonIntensity(rate=2.0),
            protection=_exp_protection(0.1, 10.0, q=0.05),
            horizon=ACCEPT_T,
            base_seed=240102,
        ),
        "state_modulated": Scenario(
            intensity=StateModulatedIntensity(rate_up=1.0, rate_down=5.0),
            protection=_exp_protection(0.1, 1.0),
            horizon=ACCEPT_T,
            base_seed=240103,
        ),
        "hawkes_strong_law": Scenario(
            intensity=HawkesIntensity(mu=1.0, alpha=0.8, beta=2.0),
            protection=ProtectionModel.never_failing(),
            horizon=ACCEPT_T,
            base_seed=240104,
        ),
    }
    for i, alpha in enumerate(SWEEP_ALPHAS):
        for j, q in enumerate(SWEEP_QS):
            scenarios[sweep_cell_name(alpha, q)] = Scenario(
                intensity=HawkesIntensity(mu=1.0, alpha=alpha, beta=2.0),
                protection=_exp_protection(0.05, 2.0, q=q),
                horizon=ACCEPT_T,
                base_seed=240110 + 3 * i + j,
            )
    return scenarios


PANEL_SCENARIOS = _build_scenarios()
SWEEP_CELLS = [sweep_cell_name(a, q) for a in SWEEP_ALPHAS for q in SWEEP_QS]

# Per-scenario extras: checkpoint grids for convergence/curve tests, rescaled
# damage epochs for the misspecification power check, batch CIs for coverage.
_KEEP = {
    "pasta": {"grid": True, "taus": True, "batch": True},
    "coupled_poisson": {"grid": True, "taus": True, "batch": True},
    "state_modulated": {"grid": True, "taus": True, "batch": True},
    sweep_cell_name(0.8, 0.2): {"grid": True},
}


@dataclass
class RepSummary:
    report: EstimateReport
    m_total: float
    m_damage: float
    lambda_damage: float
    normalized_residual: float
    ks_p: Optional[float]
    ks_p_halved: Optional[float]
    replay_err_total: float
    replay_err_damage: float
    grid: object = None
    damage_taus: Optional[np.ndarray] = None
    batch: Optional[dict[str, Optional[Interval]]] = None


def _summarize(args) -> RepSummary:
    scenario, index, keep = args
    keep_grid = keep.get("grid", False)
    trajectory = simulate(scenario, index, checkpoints=512 if keep_grid else None)
    trajectory.validate()
    report = estimate(trajectory)
    residuals = martingale_residual(trajectory)
    rescaling = time_rescaling_test(trajectory)
    halved = time_rescaling_test(trajectory, compensator_scale=0.5)
    replay_total, replay_damage = replay_compensator(trajectory)
    err_total = abs(replay_total - trajectory.lambda_total) / max(trajectory.lambda_total, 1e-12)
    err_damage = abs(replay_damage - trajectory.lambda_damage) / max(trajectory.lambda_damage, 1e-12)
    taus = None
    if keep.get("taus", False):
        taus = np.asarray([lam for ev, lam in zip(trajectory.events,
                                                  trajectory.event_lambda_damage)
                           if ev.is_damage])
    batch = None
    if keep.get("batch", False):
        batch = {stat: batch_means_ci(trajectory, stat, 16, 0.95)
                 for stat in ("cdf", "lambda", "p_time")}
    return RepSummary(
        report=report,
        m_total=residuals.m_total,
        m_damage=residuals.m_damage,
        lambda_damage=trajectory.lambda_damage,
        normalized_residual=residuals.normalized_damage_residual,
        ks_p=rescaling.ks_p_value,
        ks_p_halved=halved.ks_p_value,
        replay_err_total=err_total,
        replay_err_damage=err_damage,
        grid=trajectory.checkpoints,
        damage_taus=taus,
        batch=batch,
    )


_panel_cache: dict[str, list[RepSummary]] = {}


def run_panel(name: str) -> list[RepSummary]:
    if name not in _panel_cache:
        scenario = PANEL_SCENARIOS[name]
        keep = _KEEP.get(name, {})
        jobs = [(scenario, i, keep) for i in range(ACCEPT_R)]
        with ProcessPoolExecutor(max_workers=_WORKERS) as executor:
            _panel_cache[name] = list(executor.map(_summarize, jobs, chunksize=10))
    return _panel_cache[name]


@pytest.fixture(scope="session")
def panel():
    return run_panel


@pytest.fixture(scope="session")
def pilot_values():
    """Frozen brute-force references for the Hawkes-coupled sweep cells,
    keyed by (alpha, q). Regenerate with scripts/make_pilots.py."""
    import json
    from pathlib import Path

    path = Path(__file__).parent / "pilot_values.json"
    payload = json.loads(path.read_text())["hawkes_sweep"]
    assert payload["mu"] == 1.0 and payload["beta"] == 2.0
    return {(cell["alpha"], cell["q"]): cell for cell in payload["cells"]}


def mean_se(values) -> tuple[float, float]:
    values = list(values)
    n = len(values)
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var / n)
