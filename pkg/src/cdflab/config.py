"""Experiment configuration: TOML parsing, scenario building, sweeps.

The config format is a flat TOML document with nested tables for the
scenario blocks; the full grammar is documented in the repository README.
Parse and schema problems raise :class:`ConfigError`; scenario parameter
problems surface as ``ValueError`` from the model constructors so callers
can distinguish malformed files from invalid scenarios.
"""

from __future__ import annotations

import itertools
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterator, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .intensity import HawkesIntensity, PoissonIntensity, StateModulatedIntensity
from .protection import ProtectionModel
from .rng import Distribution
from .simulator import Scenario

__all__ = [
    "ConfigError",
    "OutputOptions",
    "ExperimentConfig",
    "load_config",
    "build_scenario",
    "apply_sweep_point",
    "sweep_grid",
]


class ConfigError(Exception):
    """Malformed or schema-invalid experiment configuration."""


@dataclass(frozen=True)
class OutputOptions:
    report: bool = True
    event_log: bool = False
    convergence_csv: bool = False


@dataclass
class ExperimentConfig:
    scenario: Scenario
    replications: int
    checkpoints: int = 512
    level: float = 0.95
    outputs: OutputOptions = field(default_factory=OutputOptions)
    sweep: Optional[dict[str, list]] = None
    raw: dict = field(default_factory=dict)


def _require(mapping: dict, key: str, context: str) -> Any:
    if key not in mapping:
        raise ConfigError(f"missing required key {key!r} in {context}")
    return mapping[key]


def _as_number(mapping: dict, key: str, context: str) -> float:
    value = _require(mapping, key, context)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{context}.{key} must be a number, got {value!r}")
    return float(value)


def _build_distribution(mapping: Any, context: str) -> Distribution:
    if not isinstance(mapping, dict):
        raise ConfigError(f"{context} must be a table with a 'kind' key")
    kind = _require(mapping, "kind", context)
    if kind == "exponential":
        return Distribution.exponential(_as_number(mapping, "rate", context))
    if kind == "weibull":
        return Distribution.weibull(_as_number(mapping, "shape", context),
                                    _as_number(mapping, "scale", context))
    if kind == "deterministic":
        return Distribution.deterministic(_as_number(mapping, "value", context))
    raise ConfigError(f"unknown distribution kind {kind!r} in {context}")


def _build_intensity(mapping: Any, allow_nonstationary: bool):
    if not isinstance(mapping, dict):
        raise ConfigError("scenario.intensity must be a table with a 'kind' key")
    ctx = "scenario.intensity"
    kind = _require(mapping, "kind", ctx)
    if kind == "poisson":
        mixture = mapping.get("mixture")
        if mixture is not None:
            if not isinstance(mixture, list) or not mixture:
                raise ConfigError(f"{ctx}.mixture must be a non-empty list of rates")
            mixture = tuple(float(v) for v in mixture)
        return PoissonIntensity(rate=_as_number(mapping, "rate", ctx), mixture=mixture)
    if kind == "hawkes":
        return HawkesIntensity(
            mu=_as_number(mapping, "mu", ctx),
            alpha=_as_number(mapping, "alpha", ctx),
            beta=_as_number(mapping, "beta", ctx),
            allow_nonstationary=allow_nonstationary,
        )
    if kind == "state_modulated":
        return StateModulatedIntensity(
            rate_up=_as_number(mapping, "rate_up", ctx),
            rate_down=_as_number(mapping, "rate_down", ctx),
        )
    raise ConfigError(f"unknown intensity kind {kind!r}")


def build_scenario(mapping: dict, allow_nonstationary: bool = False) -> Scenario:
    """Construct a Scenario from its config table."""
    if not isinstance(mapping, dict):
        raise ConfigError("scenario must be a table")
    prot_map = _require(mapping, "protection", "scenario")
    if not isinstance(prot_map, dict):
        raise ConfigError("scenario.protection must be a table")
    always_down = bool(prot_map.get("always_down", False))
    if always_down:
        protection = ProtectionModel.permanently_failed()
    else:
        q = prot_map.get("coupling_q", 0.0)
        if isinstance(q, bool) or not isinstance(q, (int, float)):
            raise ConfigError(f"scenario.protection.coupling_q must be a number, got {q!r}")
        protection = ProtectionModel(
            up_duration=_build_distribution(_require(prot_map, "up", "scenario.protection"),
                                            "scenario.protection.up"),
            down_duration=_build_distribution(_require(prot_map, "down", "scenario.protection"),
                                              "scenario.protection.down"),
            coupling_q=float(q),
        )
    base_seed = mapping.get("base_seed", 0)
    if isinstance(base_seed, bool) or not isinstance(base_seed, int):
        raise ConfigError(f"scenario.base_seed must be an integer, got {base_seed!r}")
    return Scenario(
        intensity=_build_intensity(_require(mapping, "intensity", "scenario"),
                                   allow_nonstationary),
        protection=protection,
        horizon=_as_number(mapping, "horizon", "scenario"),
        damage_on_caused_failure=bool(mapping.get("damage_on_caused_failure", False)),
        base_seed=base_seed,
    )


def load_config(path, allow_nonstationary: bool = False) -> ExperimentConfig:
    """Parse and validate an experiment file.

    Raises ConfigError for unreadable or malformed documents and ValueError
    for scenarios that fail model validation.
    """
    p = Path(path)
    try:
        text = p.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    try:
        doc = tomllib.loads(text.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML parse error in {p}: {exc}") from exc

    scenario = build_scenario(_require(doc, "scenario", "config"), allow_nonstationary)
    replications = int(doc.get("replications", 1))
    if replications < 1:
        raise ConfigError(f"replications must be >= 1, got {replications}")
    checkpoints = int(doc.get("checkpoints", 512))
    if checkpoints < 0:
        raise ConfigError(f"checkpoints must be >= 0, got {checkpoints}")
    level = float(doc.get("level", 0.95))
    if not 0.0 < level < 1.0:
        raise ConfigError(f"level must be in (0, 1), got {level}")

    out_map = doc.get("outputs", {})
    if not isinstance(out_map, dict):
        raise ConfigError("outputs must be a table")
    outputs = OutputOptions(
        report=bool(out_map.get("report", True)),
        event_log=bool(out_map.get("event_log", False)),
        convergence_csv=bool(out_map.get("convergence_csv", False)),
    )

    sweep = doc.get("sweep")
    if sweep is not None:
        if not isinstance(sweep, dict) or not sweep:
            raise ConfigError("sweep must be a non-empty table of parameter -> value list")
        for name, values in sweep.items():
            if not isinstance(values, list) or not values:
                raise ConfigError(f"sweep parameter {name!r} must map to a non-empty list")
            _resolve_sweep_target(scenario, name)  # validates the path now
        sweep = {name: list(values) for name, values in sweep.items()}

    return ExperimentConfig(scenario=scenario, replications=replications,
                            checkpoints=checkpoints, level=level,
                            outputs=outputs, sweep=sweep, raw=doc)


_SWEEP_ROOTS = {"intensity", "protection"}


def _resolve_sweep_target(scenario: Scenario, dotted: str) -> tuple[Optional[str], str]:
    """Validate a dotted sweep path against the concrete scenario."""
    parts = dotted.split(".")
    if len(parts) == 1:
        root, leaf = None, parts[0]
        holder = scenario
    elif len(parts) == 2 and parts[0] in _SWEEP_ROOTS:
        root, leaf = parts
        holder = getattr(scenario, root)
    else:
        raise ConfigError(f"sweep parameter {dotted!r} does not name a scenario field")
    if not hasattr(holder, leaf) or leaf.startswith("_"):
        raise ConfigError(f"sweep parameter {dotted!r} does not name a scenario field")
    return root, leaf


def apply_sweep_point(scenario: Scenario, assignment: dict[str, Any]) -> Scenario:
    """Return the scenario with the swept fields replaced; re-validates."""
    out = scenario
    for dotted, value in assignment.items():
        root, leaf = _resolve_sweep_target(out, dotted)
        if root is None:
            out = replace(out, **{leaf: value})
        else:
            sub = replace(getattr(out, root), **{leaf: value})
            out = replace(out, **{root: sub})
    return out


def sweep_grid(config: ExperimentConfig) -> Iterator[dict[str, Any]]:
    """Yield one {parameter: value} assignment per grid point, in config order."""
    if not config.sweep:
        raise ConfigError("config has no sweep block")
    names = list(config.sweep.keys())
    for combo in itertools.product(*(config.sweep[n] for n in names)):
        yield dict(zip(names, combo))
