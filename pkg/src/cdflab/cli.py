"""Experiment runner: replication sweeps, reports, and bias tables.

Exit codes: 0 success, 2 config error, 3 scenario validation error,
4 runtime invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, apply_sweep_point, load_config, sweep_grid
from .inference import (
    EstimateReport,
    estimate,
    martingale_residual,
    one_sided_positive_pvalue,
    pool,
    time_rescaling_test,
)
from .oracles import UnsupportedScenario, markov_cdf_from_scenario
from .simulator import CheckpointGrid, Scenario, simulate, write_event_log

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SCENARIO = 3
EXIT_RUNTIME = 4

_KS_LEVEL = 0.01


@dataclass
class ReplicationOutcome:
    """Compact per-replication summary kept after the trajectory is dropped."""

    index: int
    report: EstimateReport
    m_total: float
    m_damage: float
    normalized_residual: float
    lambda_damage: float
    ks_p_value: Optional[float]
    grid: Optional[CheckpointGrid]


def _run_replication(args) -> ReplicationOutcome:
    scenario, index, checkpoints, event_log_path = args
    trajectory = simulate(scenario, index, checkpoints=checkpoints or None)
    trajectory.validate()
    if event_log_path is not None:
        write_event_log(trajectory, event_log_path)
    report = estimate(trajectory)
    residuals = martingale_residual(trajectory)
    rescaling = time_rescaling_test(trajectory)
    return ReplicationOutcome(
        index=index,
        report=report,
        m_total=residuals.m_total,
        m_damage=residuals.m_damage,
        normalized_residual=residuals.normalized_damage_residual,
        lambda_damage=trajectory.lambda_damage,
        ks_p_value=rescaling.ks_p_value,
        grid=trajectory.checkpoints,
    )


def _run_all(scenario: Scenario, replications: int, checkpoints: int,
             threads: int, event_log_dir: Optional[Path]) -> list[ReplicationOutcome]:
    jobs = []
    for i in range(replications):
        log_path = None
        if event_log_dir is not None:
            log_path = str(event_log_dir / f"events_rep{i:04d}.csv")
        jobs.append((scenario, i, checkpoints, log_path))
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as executor:
            outcomes = list(executor.map(_run_replication, jobs))
    else:
        outcomes = [_run_replication(job) for job in jobs]
    return outcomes


def _mean_sd(values: Sequence[float]) -> tuple[float, float]:
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        return mean, 0.0
    sd = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - 1))
    return mean, sd


def _aggregate(outcomes: Sequence[ReplicationOutcome], config: ExperimentConfig) -> dict:
    """Merge per-replication outcomes into the report document.

    Insensitive to input order: outcomes are sorted by replication index and
    all sums use exact accumulation.
    """
    ordered = sorted(outcomes, key=lambda o: o.index)
    reports = [o.report for o in ordered]
    if len(reports) > 1:
        pooled = pool(reports, level=config.level)
    else:
        pooled = reports[0]

    m_totals = [o.m_total for o in ordered]
    m_damages = [o.m_damage for o in ordered]
    residuals = [o.normalized_residual for o in ordered]
    mt_mean, mt_sd = _mean_sd(m_totals)
    md_mean, md_sd = _mean_sd(m_damages)
    nr_mean, nr_sd = _mean_sd(residuals)
    strong_law_ok = sum(
        1 for o in ordered if abs(o.m_damage) <= 3.0 * math.sqrt(max(o.lambda_damage, 0.0)))
    ks_ps = [o.ks_p_value for o in ordered if o.ks_p_value is not None]
    ks_rejections = sum(1 for p in ks_ps if p < _KS_LEVEL)

    diagnostics = {
        "m_total_mean": mt_mean,
        "m_total_sd": mt_sd,
        "m_damage_mean": md_mean,
        "m_damage_sd": md_sd,
        "normalized_residual_mean": nr_mean,
        "normalized_residual_sd": nr_sd,
        "strong_law_fraction": strong_law_ok / len(ordered),
        "ks_tests_run": len(ks_ps),
        "ks_tests_skipped": len(ordered) - len(ks_ps),
        "ks_rejections_at_1pct": ks_rejections,
        "ks_rejection_rate": (ks_rejections / len(ks_ps)) if ks_ps else None,
    }

    document = {
        "generator": {"tool": "cdflab", "version": __version__},
        "config": config.raw,
        "scenario_id": reports[0].scenario_id,
        "replications": len(ordered),
        "pooled": pooled.to_json_dict(),
        "diagnostics": diagnostics,
    }
    if len(reports) > 1:
        biases = [r.bias_hat for r in reports]
        document["bias_test"] = {
            "mean": _mean_sd(biases)[0],
            "se": _mean_sd(biases)[1] / math.sqrt(len(biases)),
            "p_value_bias_positive": one_sided_positive_pvalue(biases),
        }
    return document


def _convergence_rows(grids: Sequence[CheckpointGrid]) -> list[tuple[float, float, float, float, float]]:
    """Pooled checkpoint series: damage rate, rate-times-unavailability
    estimate, their gap, and the aggregate normalized residual."""
    times = grids[0].times
    R = len(grids)
    nd = np.zeros_like(times)
    n = np.zeros_like(times)
    down = np.zeros_like(times)
    lamD = np.zeros_like(times)
    for g in grids:
        nd += g.n_damage
        n += g.n_events
        down += g.downtime
        lamD += g.lambda_damage
    cdf_hat = nd / R / times
    rasmussen = (n / R / times) * (down / R / times)
    bias = cdf_hat - rasmussen
    with np.errstate(invalid="ignore", divide="ignore"):
        norm_resid = np.where(lamD > 0.0, (nd - lamD) / np.sqrt(np.maximum(lamD, 1e-300)), 0.0)
    return list(zip(times, cdf_hat, rasmussen, bias, norm_resid))


def _write_convergence_csv(path: Path, grids: Sequence[CheckpointGrid]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "cdf_hat", "rasmussen_hat", "bias", "norm_residual"])
        for row in _convergence_rows(grids):
            writer.writerow([format(v, ".9g") for v in row])


def _write_report(path: Path, document: dict) -> None:
    path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n")


def _cmd_run(config: ExperimentConfig, out_dir: Path, threads: int) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    event_dir = out_dir if config.outputs.event_log else None
    outcomes = _run_all(config.scenario, config.replications, config.checkpoints,
                        threads, event_dir)
    document = _aggregate(outcomes, config)
    if config.outputs.report:
        _write_report(out_dir / "report.json", document)
    if config.outputs.convergence_csv:
        grids = [o.grid for o in sorted(outcomes, key=lambda o: o.index)]
        if any(g is None for g in grids):
            raise ConfigError("convergence_csv output requires checkpoints > 0")
        _write_convergence_csv(out_dir / "convergence.csv", grids)
    print(f"wrote {out_dir / 'report.json'}" if config.outputs.report
          else "run complete (report output disabled)")
    return EXIT_OK


def _cmd_bias_study(config: ExperimentConfig, out_dir: Path, threads: int) -> int:
    if not config.sweep:
        print("bias-study requires a [sweep] block in the config", file=sys.stderr)
        return EXIT_CONFIG
    out_dir.mkdir(parents=True, exist_ok=True)
    param_names = list(config.sweep.keys())
    rows = []
    for assignment in sweep_grid(config):
        scenario = apply_sweep_point(config.scenario, assignment)
        outcomes = _run_all(scenario, config.replications, 0, threads, None)
        reports = [o.report for o in sorted(outcomes, key=lambda o: o.index)]
        pooled = pool(reports, level=config.level) if len(reports) > 1 else reports[0]
        biases = [r.bias_hat for r in reports]
        bias_mean, bias_sd = _mean_sd(biases)
        se = bias_sd / math.sqrt(len(biases)) if len(biases) > 1 else 0.0
        try:
            true_cdf = format(markov_cdf_from_scenario(scenario).true_cdf, ".9g")
        except UnsupportedScenario:
            true_cdf = ""
        p_value = (format(one_sided_positive_pvalue(biases), ".9g")
                   if len(biases) > 1 else "")
        rows.append(
            [format(assignment[name], ".9g") if isinstance(assignment[name], float)
             else str(assignment[name]) for name in param_names]
            + [true_cdf,
               format(pooled.cdf_hat, ".9g"),
               format(pooled.rasmussen_hat, ".9g"),
               format(bias_mean, ".9g"),
               format(se, ".9g"),
               p_value])
    table_path = out_dir / "bias_study.csv"
    with open(table_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(param_names + ["true_cdf", "cdf_hat", "rasmussen_hat",
                                       "bias_hat", "bias_se", "p_value_bias_positive"])
        writer.writerows(rows)
    print(f"wrote {table_path}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cdflab",
        description="Coupled counting-process simulation and damage-rate estimation")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "simulate replications and write the pooled report"),
        ("bias-study", "run a parameter sweep and tabulate the estimator bias"),
        ("validate", "parse and validate a config without running"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="experiment TOML file")
        if name != "validate":
            p.add_argument("--out-dir", required=True, help="directory for artifact files")
            p.add_argument("--threads", type=int, default=1,
                           help="replication-level worker processes (default 1)")
        p.add_argument("--allow-nonstationary", action="store_true",
                       help="permit Hawkes models with branching ratio >= 1 (demo only)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config, allow_nonstationary=args.allow_nonstationary)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"scenario validation error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO

    if args.command == "validate":
        print(f"config OK: scenario {config.scenario.identity()}, "
              f"{config.replications} replications")
        return EXIT_OK

    threads = max(1, args.threads)
    out_dir = Path(args.out_dir)
    try:
        if args.command == "run":
            return _cmd_run(config, out_dir, threads)
        return _cmd_bias_study(config, out_dir, threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"scenario validation error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    except RuntimeError as exc:
        print(f"runtime invariant violation: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
