"""Command-line interface: artifacts, exit codes, determinism."""

import csv
import json
import math

import pytest

import cdflab.cli as cli_module
from cdflab import read_event_log
from cdflab.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, EXIT_SCENARIO, main

SMALL_RUN = """
replications = 20
checkpoints = 32

[scenario]
horizon = 150.0
base_seed = 5

[scenario.intensity]
kind = "poisson"
rate = 2.0

[scenario.protection]
coupling_q = 0.1

[scenario.protection.up]
kind = "exponential"
rate = 0.2

[scenario.protection.down]
kind = "exponential"
rate = 2.0

[outputs]
report = true
event_log = true
convergence_csv = true
"""

SWEEP = """
replications = 20

[scenario]
horizon = 150.0
base_seed = 6

[scenario.intensity]
kind = "poisson"
rate = 2.0

[scenario.protection]
coupling_q = 0.0

[scenario.protection.up]
kind = "exponential"
rate = 0.2

[scenario.protection.down]
kind = "exponential"
rate = 2.0

[sweep]
"protection.coupling_q" = [0.0, 0.2]
"""


def _write(tmp_path, text, name="config.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_validate_ok(tmp_path, capsys):
    path = _write(tmp_path, SMALL_RUN)
    assert main(["validate", "--config", str(path)]) == EXIT_OK
    assert "config OK" in capsys.readouterr().out


def test_validate_config_error(tmp_path, capsys):
    path = _write(tmp_path, "replications = [")
    assert main(["validate", "--config", str(path)]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_validate_scenario_error(tmp_path, capsys):
    bad = SMALL_RUN.replace("rate = 2.0", "rate = -2.0", 1)
    path = _write(tmp_path, bad)
    assert main(["validate", "--config", str(path)]) == EXIT_SCENARIO
    assert "scenario validation error" in capsys.readouterr().err


def test_nonstationary_config_rejected_without_flag(tmp_path):
    text = SMALL_RUN.replace(
        'kind = "poisson"\nrate = 2.0',
        'kind = "hawkes"\nmu = 1.0\nalpha = 2.4\nbeta = 2.0')
    path = _write(tmp_path, text)
    assert main(["validate", "--config", str(path)]) == EXIT_SCENARIO
    with pytest.warns(UserWarning):
        assert main(["validate", "--config", str(path), "--allow-nonstationary"]) == EXIT_OK


def test_run_writes_all_artifacts(tmp_path):
    config = _write(tmp_path, SMALL_RUN)
    out = tmp_path / "out"
    assert main(["run", "--config", str(config), "--out-dir", str(out)]) == EXIT_OK

    report = json.loads((out / "report.json").read_text())
    assert report["replications"] == 20
    assert report["config"]["scenario"]["base_seed"] == 5
    pooled = report["pooled"]
    for key in ("lambda_hat", "p_time", "p_palm", "cdf_hat", "rasmussen_hat",
                "bias_hat", "ci"):
        assert key in pooled
    assert pooled["ci"]["cdf_hat"]["level"] == 0.95
    diag = report["diagnostics"]
    assert 0.0 <= diag["strong_law_fraction"] <= 1.0
    assert diag["ks_tests_run"] + diag["ks_tests_skipped"] == 20
    assert "p_value_bias_positive" in report["bias_test"]

    # every emitted event log re-reads cleanly
    logs = sorted(out.glob("events_rep*.csv"))
    assert len(logs) == 20
    for path in logs[:3]:
        assert read_event_log(path)

    with open(out / "convergence.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "cdf_hat", "rasmussen_hat", "bias", "norm_residual"]
    assert len(rows) == 1 + 32
    final = [float(v) for v in rows[-1]]
    assert final[0] == pytest.approx(150.0)
    assert final[3] == pytest.approx(final[1] - final[2], abs=1e-9)


def test_run_deterministic_and_thread_invariant(tmp_path):
    config = _write(tmp_path, SMALL_RUN)
    outs = [tmp_path / f"out{k}" for k in range(3)]
    assert main(["run", "--config", str(config), "--out-dir", str(outs[0])]) == EXIT_OK
    assert main(["run", "--config", str(config), "--out-dir", str(outs[1])]) == EXIT_OK
    assert main(["run", "--config", str(config), "--out-dir", str(outs[2]),
                 "--threads", "2"]) == EXIT_OK
    ref = (outs[0] / "report.json").read_bytes()
    assert (outs[1] / "report.json").read_bytes() == ref
    assert (outs[2] / "report.json").read_bytes() == ref
    refcsv = (outs[0] / "convergence.csv").read_bytes()
    assert (outs[1] / "convergence.csv").read_bytes() == refcsv
    assert (outs[2] / "convergence.csv").read_bytes() == refcsv


def test_aggregation_is_order_independent(tmp_path):
    import random

    from cdflab.config import load_config

    config = load_config(_write(tmp_path, SMALL_RUN))
    outcomes = cli_module._run_all(config.scenario, config.replications,
                                   config.checkpoints, 1, None)
    shuffled = list(outcomes)
    random.Random(3).shuffle(shuffled)
    assert cli_module._aggregate(outcomes, config) == cli_module._aggregate(shuffled, config)


def test_bias_study_requires_sweep(tmp_path, capsys):
    config = _write(tmp_path, SMALL_RUN)
    out = tmp_path / "out"
    assert main(["bias-study", "--config", str(config), "--out-dir", str(out)]) == EXIT_CONFIG
    assert "sweep" in capsys.readouterr().err


def test_bias_study_table(tmp_path):
    config = _write(tmp_path, SWEEP)
    out = tmp_path / "study"
    assert main(["bias-study", "--config", str(config), "--out-dir", str(out)]) == EXIT_OK
    with open(out / "bias_study.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2
    assert [r["protection.coupling_q"] for r in rows] == ["0", "0.2"]
    for row in rows:
        # constant-rate coupling keeps the rate-times-unavailability estimate
        # exact, so true values exist and the bias stays near zero
        assert row["true_cdf"] != ""
        assert abs(float(row["bias_hat"])) <= 6.0 * max(float(row["bias_se"]), 1e-12)
        assert 0.0 <= float(row["p_value_bias_positive"]) <= 1.0
    assert float(rows[1]["true_cdf"]) > float(rows[0]["true_cdf"])


def test_runtime_invariant_violation_maps_to_exit_4(tmp_path, monkeypatch):
    config = _write(tmp_path, SMALL_RUN)

    real_simulate = cli_module.simulate

    def corrupting(scenario, index, checkpoints=512):
        trajectory = real_simulate(scenario, index, checkpoints=checkpoints)
        trajectory.lambda_damage = trajectory.lambda_total + 1.0
        return trajectory

    monkeypatch.setattr(cli_module, "simulate", corrupting)
    assert main(["run", "--config", str(config),
                 "--out-dir", str(tmp_path / "out")]) == EXIT_RUNTIME


def test_missing_config_file(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.toml"),
                 "--out-dir", str(tmp_path / "out")]) == EXIT_CONFIG


def test_report_embeds_resolved_config_and_seed(tmp_path):
    config = _write(tmp_path, SMALL_RUN)
    out = tmp_path / "out"
    main(["run", "--config", str(config), "--out-dir", str(out)])
    report = json.loads((out / "report.json").read_text())
    assert report["config"]["scenario"]["base_seed"] == 5
    assert report["config"]["scenario"]["intensity"]["kind"] == "poisson"
    assert report["generator"]["tool"] == "cdflab"
    # pooled estimates keep the factorization approximately (it is exact per
    # replication; pooling multiplies means rather than averaging products)
    pooled = report["pooled"]
    assert pooled["cdf_hat"] == pytest.approx(pooled["lambda_hat"] * pooled["p_palm"],
                                              rel=0.02)
