"""Config parsing, scenario building, sweep handling."""

import pytest

from cdflab import HawkesIntensity, PoissonIntensity, StateModulatedIntensity
from cdflab.config import (
    ConfigError,
    apply_sweep_point,
    build_scenario,
    load_config,
    sweep_grid,
)

GOOD = """
replications = 10
checkpoints = 64
level = 0.9

[scenario]
horizon = 100.0
base_seed = 7

[scenario.intensity]
kind = "hawkes"
mu = 1.0
alpha = 0.8
beta = 2.0

[scenario.protection]
coupling_q = 0.1

[scenario.protection.up]
kind = "exponential"
rate = 0.05

[scenario.protection.down]
kind = "exponential"
rate = 2.0

[outputs]
report = true
event_log = true
convergence_csv = true

[sweep]
"intensity.alpha" = [0.4, 0.8]
"protection.coupling_q" = [0.05, 0.1, 0.2]
"""


def _write(tmp_path, text):
    path = tmp_path / "config.toml"
    path.write_text(text)
    return path


def test_full_document_round_trip(tmp_path):
    config = load_config(_write(tmp_path, GOOD))
    assert config.replications == 10
    assert config.checkpoints == 64
    assert config.level == 0.9
    assert isinstance(config.scenario.intensity, HawkesIntensity)
    assert config.scenario.protection.coupling_q == 0.1
    assert config.outputs.event_log is True
    assert list(config.sweep) == ["intensity.alpha", "protection.coupling_q"]
    assert config.raw["scenario"]["horizon"] == 100.0


def test_parse_error_reports_line(tmp_path):
    with pytest.raises(ConfigError, match="line"):
        load_config(_write(tmp_path, "replications = [unclosed"))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.toml")


def test_missing_required_key(tmp_path):
    text = GOOD.replace('kind = "hawkes"\nmu = 1.0\n', 'kind = "hawkes"\n')
    with pytest.raises(ConfigError, match="mu"):
        load_config(_write(tmp_path, text))


def test_wrong_type_is_config_error(tmp_path):
    text = GOOD.replace("horizon = 100.0", 'horizon = "long"')
    with pytest.raises(ConfigError, match="horizon"):
        load_config(_write(tmp_path, text))


def test_invalid_scenario_is_value_error(tmp_path):
    text = GOOD.replace("alpha = 0.8", "alpha = 2.4")
    with pytest.raises(ValueError, match="non-stationary"):
        load_config(_write(tmp_path, text))


def test_nonstationary_allowed_with_flag(tmp_path):
    text = GOOD.replace("alpha = 0.8", "alpha = 2.4")
    with pytest.warns(UserWarning, match="non-stationary"):
        config = load_config(_write(tmp_path, text), allow_nonstationary=True)
    assert config.scenario.intensity.alpha == 2.4


def test_unknown_sweep_parameter(tmp_path):
    text = GOOD.replace('"intensity.alpha"', '"intensity.gamma"')
    with pytest.raises(ConfigError, match="gamma"):
        load_config(_write(tmp_path, text))


def test_sweep_grid_is_cartesian_in_config_order(tmp_path):
    config = load_config(_write(tmp_path, GOOD))
    points = list(sweep_grid(config))
    assert len(points) == 6
    assert points[0] == {"intensity.alpha": 0.4, "protection.coupling_q": 0.05}
    assert points[-1] == {"intensity.alpha": 0.8, "protection.coupling_q": 0.2}


def test_apply_sweep_point_replaces_and_revalidates(tmp_path):
    config = load_config(_write(tmp_path, GOOD))
    swept = apply_sweep_point(config.scenario,
                              {"intensity.alpha": 0.4, "protection.coupling_q": 0.2})
    assert swept.intensity.alpha == 0.4
    assert swept.protection.coupling_q == 0.2
    assert config.scenario.intensity.alpha == 0.8  # original untouched
    with pytest.raises(ValueError, match="non-stationary"):
        apply_sweep_point(config.scenario, {"intensity.alpha": 5.0})


def test_scenario_level_sweep_parameter():
    scenario = build_scenario({
        "horizon": 10.0,
        "intensity": {"kind": "poisson", "rate": 1.0},
        "protection": {"always_down": True},
    })
    swept = apply_sweep_point(scenario, {"horizon": 25.0})
    assert swept.horizon == 25.0


def test_poisson_and_modulated_kinds():
    poisson = build_scenario({
        "horizon": 5.0,
        "intensity": {"kind": "poisson", "rate": 2.0, "mixture": [1.0, 3.0]},
        "protection": {
            "up": {"kind": "deterministic", "value": 4.0},
            "down": {"kind": "weibull", "shape": 2.0, "scale": 1.0},
        },
    })
    assert isinstance(poisson.intensity, PoissonIntensity)
    assert poisson.intensity.mixture == (1.0, 3.0)
    assert poisson.protection.up_duration.kind == "deterministic"

    modulated = build_scenario({
        "horizon": 5.0,
        "intensity": {"kind": "state_modulated", "rate_up": 1.0, "rate_down": 5.0},
        "protection": {
            "up": {"kind": "exponential", "rate": 0.1},
            "down": {"kind": "exponential", "rate": 1.0},
        },
    })
    assert isinstance(modulated.intensity, StateModulatedIntensity)


def test_unknown_kinds_rejected():
    with pytest.raises(ConfigError, match="intensity kind"):
        build_scenario({
            "horizon": 5.0,
            "intensity": {"kind": "cox"},
            "protection": {"always_down": True},
        })
    with pytest.raises(ConfigError, match="distribution kind"):
        build_scenario({
            "horizon": 5.0,
            "intensity": {"kind": "poisson", "rate": 1.0},
            "protection": {
                "up": {"kind": "gamma", "rate": 1.0},
                "down": {"kind": "exponential", "rate": 1.0},
            },
        })


def test_bad_replications_and_level(tmp_path):
    with pytest.raises(ConfigError, match="replications"):
        load_config(_write(tmp_path, GOOD.replace("replications = 10", "replications = 0")))
    with pytest.raises(ConfigError, match="level"):
        load_config(_write(tmp_path, GOOD.replace("level = 0.9", "level = 1.5")))
