"""Regenerate the frozen brute-force pilot values used by the test suite.

Each Hawkes-coupled sweep cell gets a large seed-pinned Monte Carlo run;
the pooled damage rate and bias (with standard errors) are written to
tests/pilot_values.json. Re-running this script reproduces the file
byte-for-byte.
"""

from __future__ import annotations

import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from cdflab import Distribution, HawkesIntensity, ProtectionModel, Scenario
from cdflab.simulator import simulate

HORIZON = 5000.0
REPLICATIONS = 2000
MU = 1.0
BETA = 2.0
UP_RATE = 0.05
DOWN_RATE = 2.0
ALPHAS = (0.4, 0.8, 1.2)
QS = (0.05, 0.1, 0.2)
SEED_BASE = 910000
WORKERS = 2


def _cell_scenario(alpha: float, q: float, seed: int) -> Scenario:
    return Scenario(
        intensity=HawkesIntensity(mu=MU, alpha=alpha, beta=BETA),
        protection=ProtectionModel(
            up_duration=Distribution.exponential(UP_RATE),
            down_duration=Distribution.exponential(DOWN_RATE),
            coupling_q=q,
        ),
        horizon=HORIZON,
        base_seed=seed,
    )


def _stats_chunk(args):
    scenario, indices = args
    rows = []
    for i in indices:
        t = simulate(scenario, i, checkpoints=None)
        cdf = t.n_damage / HORIZON
        lam = t.n_events / HORIZON
        p_time = 1.0 - t.uptime_integral / HORIZON
        rows.append((cdf, lam, p_time, cdf - lam * p_time))
    return rows


def _mean_se(values):
    n = len(values)
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var / n)


def main() -> int:
    cells = []
    start = time.time()
    for ci, (alpha, q) in enumerate([(a, q) for a in ALPHAS for q in QS]):
        seed = SEED_BASE + ci
        scenario = _cell_scenario(alpha, q, seed)
        chunks = [(scenario, range(w, REPLICATIONS, WORKERS)) for w in range(WORKERS)]
        with ProcessPoolExecutor(max_workers=WORKERS) as pool:
            parts = list(pool.map(_stats_chunk, chunks))
        rows = [row for part in parts for row in part]
        cdf, cdf_se = _mean_se([r[0] for r in rows])
        lam, _ = _mean_se([r[1] for r in rows])
        p_time, _ = _mean_se([r[2] for r in rows])
        bias, bias_se = _mean_se([r[3] for r in rows])
        cells.append({
            "alpha": alpha,
            "q": q,
            "seed": seed,
            "cdf": cdf,
            "cdf_se": cdf_se,
            "lambda": lam,
            "p_time": p_time,
            "bias": bias,
            "bias_se": bias_se,
        })
        print(f"cell alpha={alpha} q={q}: cdf={cdf:.6f}±{cdf_se:.6f} "
              f"bias={bias:.6f}±{bias_se:.6f} ({time.time() - start:.0f}s)", flush=True)

    payload = {
        "hawkes_sweep": {
            "mu": MU,
            "beta": BETA,
            "up_rate": UP_RATE,
            "down_rate": DOWN_RATE,
            "horizon": HORIZON,
            "replications": REPLICATIONS,
            "cells": cells,
        }
    }
    out = Path(__file__).resolve().parent.parent / "tests" / "pilot_values.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
