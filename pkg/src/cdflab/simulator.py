"""Joint trajectory generation for arrivals, protection state, and hazards.

``simulate`` produces one replication of the coupled system by thinning:
candidate arrivals are proposed from a dominating rate that is exact for all
three intensity families (constant rates are their own bound; a Hawkes
intensity only decays between events), and the bound is refreshed at every
accepted event, protection transition, and rejected candidate. Between
consecutive state changes the cumulative hazard and its damage-weighted
variant are accumulated in closed form, never on a grid, so the quantities
whose time averages define the observed damage rate carry no discretization
error.

``replay_compensator`` recomputes both cumulative hazards from the event log
alone by numerical quadrature of the pointwise intensity; it is the
independent check on the closed-form accumulation.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from .intensity import (
    HawkesIntensity,
    IntensityModel,
    IntensityState,
    PoissonIntensity,
    evaluate,
)
from .protection import ProtectionModel
from .rng import RngStream, derive_stream

__all__ = [
    "INITIATING_EVENT",
    "PROTECTION_DOWN",
    "PROTECTION_UP",
    "EventRecord",
    "Scenario",
    "CheckpointGrid",
    "Trajectory",
    "simulate",
    "replay_compensator",
    "flag_segments",
    "write_event_log",
    "read_event_log",
]

INITIATING_EVENT = "IE"
PROTECTION_DOWN = "PDOWN"
PROTECTION_UP = "PUP"

_POISSON, _HAWKES, _MODULATED = 0, 1, 2
_BLOCK = 4096

# 16-point Gauss-Legendre rule on [0, 1], used by the replay quadrature.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
_GL_X = (_GL_X + 1.0) / 2.0
_GL_W = _GL_W / 2.0


@dataclass(slots=True)
class EventRecord:
    """One row of the event log.

    ``left_limit_flag`` is recorded for initiating events only and holds the
    protection flag immediately before any coupling effect of the same
    arrival.
    """

    time: float
    kind: str
    left_limit_flag: Optional[int]
    is_damage: bool
    caused_failure: bool


@dataclass(frozen=True)
class Scenario:
    """Full generative specification of one experiment."""

    intensity: IntensityModel
    protection: ProtectionModel
    horizon: float
    damage_on_caused_failure: bool = False
    base_seed: int = 0

    def __post_init__(self) -> None:
        if not self.horizon > 0.0:
            raise ValueError(f"horizon must be > 0, got {self.horizon}")
        if self.base_seed < 0:
            raise ValueError(f"base_seed must be nonnegative, got {self.base_seed}")

    def identity(self) -> str:
        """Stable digest of every field that defines the generative law."""
        canonical = repr((self.intensity, self.protection, self.horizon,
                          self.damage_on_caused_failure, self.base_seed))
        return hashlib.sha1(canonical.encode()).hexdigest()[:16]


@dataclass
class CheckpointGrid:
    """Sampled process values on an evenly spaced time grid."""

    times: np.ndarray
    n_events: np.ndarray
    n_damage: np.ndarray
    lambda_total: np.ndarray
    lambda_damage: np.ndarray
    downtime: np.ndarray


@dataclass
class Trajectory:
    """One realized replication with its exact compensator accounting.

    ``event_lambda_total`` and ``event_lambda_damage`` hold the cumulative
    hazards at each event epoch, aligned with ``events``.
    """

    scenario: Scenario
    replication_index: int
    horizon: float
    events: list[EventRecord]
    lambda_total: float
    lambda_damage: float
    uptime_integral: float
    n_events: int
    n_damage: int
    n_left_limit_down: int
    n_caused_failures: int
    event_lambda_total: list[float]
    event_lambda_damage: list[float]
    intensity_realized: IntensityModel
    checkpoints: Optional[CheckpointGrid] = None

    def validate(self) -> None:
        """Check the structural invariants; raises RuntimeError on breach."""
        tol = 1e-9 * max(1.0, self.lambda_total)
        if self.lambda_damage > self.lambda_total + tol:
            raise RuntimeError("lambda_damage exceeds lambda_total")
        if self.n_damage > self.n_events:
            raise RuntimeError("damage count exceeds event count")
        if not -1e-9 <= self.uptime_integral <= self.horizon * (1.0 + 1e-12) + 1e-9:
            raise RuntimeError("uptime integral outside [0, horizon]")
        last = -math.inf
        for ev in self.events:
            if ev.time <= last:
                raise RuntimeError("event log is not strictly increasing in time")
            last = ev.time
            if ev.is_damage and ev.kind != INITIATING_EVENT:
                raise RuntimeError("damage marked on a non-arrival event")


def _resolve_intensity(model: IntensityModel, stream: RngStream) -> IntensityModel:
    """Realize per-replication randomness in the model (rate mixtures)."""
    if isinstance(model, PoissonIntensity) and model.mixture is not None:
        idx = int(stream.generator.integers(0, len(model.mixture)))
        return PoissonIntensity(rate=model.mixture[idx])
    return model


def _duration_code(dist) -> tuple[int, float, float]:
    if dist.kind == "exponential":
        return 0, 1.0 / dist.rate, 0.0
    if dist.kind == "weibull":
        return 1, dist.scale, 1.0 / dist.shape
    return 2, dist.value, 0.0


def simulate(scenario: Scenario, replication_index: int,
             checkpoints: Optional[int] = 512) -> Trajectory:
    """Generate one replication; pure in ``(scenario, replication_index)``.

    ``checkpoints`` sets the number of evenly spaced grid rows sampled along
    the trajectory (``None`` or 0 disables the grid).
    """
    stream = derive_stream(scenario.base_seed, replication_index)
    gen = stream.generator
    model = _resolve_intensity(scenario.intensity, stream)
    prot = scenario.protection
    horizon = scenario.horizon
    q = prot.coupling_q
    damage_on_caused = scenario.damage_on_caused_failure

    if isinstance(model, PoissonIntensity):
        kind, rate0 = _POISSON, model.rate
        mu = alpha = beta = rate_up = rate_down = 0.0
    elif isinstance(model, HawkesIntensity):
        kind, mu, alpha, beta = _HAWKES, model.mu, model.alpha, model.beta
        rate0 = rate_up = rate_down = 0.0
    else:
        kind, rate_up, rate_down = _MODULATED, model.rate_up, model.rate_down
        rate0 = mu = alpha = beta = 0.0

    up_code = _duration_code(prot.up_duration)
    down_code = _duration_code(prot.down_duration)

    # Buffered uniforms: one sequential stream feeds proposals, acceptance
    # tests, coupling checks, and residence-time draws.
    buf = gen.random(_BLOCK).tolist()
    bi = 0

    def _draw(code: tuple[int, float, float]) -> float:
        nonlocal buf, bi
        c, p1, p2 = code
        if c == 2:
            return p1
        if bi == _BLOCK:
            buf = gen.random(_BLOCK).tolist()
            bi = 0
        x = -math.log(1.0 - buf[bi])
        bi += 1
        return x * p1 if c == 0 else p1 * x ** p2

    if prot.always_down:
        flag = 0
        next_tr = math.inf
    else:
        flag = 1
        next_tr = _draw(up_code)

    lam_acc = 0.0
    lamD_acc = 0.0
    up_acc = 0.0
    down_acc = 0.0
    n_ie = n_dmg = n_left0 = n_caused = 0

    events: list[EventRecord] = []
    ev_lam: list[float] = []
    ev_lamD: list[float] = []

    ncp = int(checkpoints) if checkpoints else 0
    if ncp:
        cp_t = [horizon * (k + 1) / ncp for k in range(ncp)]
        cp_n = np.zeros(ncp, dtype=np.int64)
        cp_nd = np.zeros(ncp, dtype=np.int64)
        cp_lam = np.zeros(ncp)
        cp_lamD = np.zeros(ncp)
        cp_down = np.zeros(ncp)
        next_cp = cp_t[0]
    else:
        cp_t = []
        next_cp = math.inf
    cp_i = 0

    t_seg = 0.0   # anchor of the open segment (last event or transition)
    S = 0.0       # Hawkes excitation at the anchor
    t_prop = 0.0  # proposal clock within the segment
    S_prop = 0.0  # excitation decayed to the proposal clock

    def _fill_cps(limit: float, strict: bool, n_now: int, nd_now: int) -> None:
        # Sample grid rows in (t_seg, limit]; strict excludes the endpoint.
        nonlocal cp_i, next_cp
        while cp_i < ncp:
            g = cp_t[cp_i]
            if (g >= limit) if strict else (g > limit):
                break
            dg = g - t_seg
            if kind == _HAWKES:
                pinc = mu * dg + (S / beta) * -math.expm1(-beta * dg)
            elif kind == _POISSON:
                pinc = rate0 * dg
            else:
                pinc = (rate_up if flag == 1 else rate_down) * dg
            cp_n[cp_i] = n_now
            cp_nd[cp_i] = nd_now
            cp_lam[cp_i] = lam_acc + pinc
            if flag == 0:
                cp_lamD[cp_i] = lamD_acc + pinc
                cp_down[cp_i] = down_acc + dg
            else:
                cp_lamD[cp_i] = lamD_acc
                cp_down[cp_i] = down_acc
            cp_i += 1
        next_cp = cp_t[cp_i] if cp_i < ncp else math.inf

    while True:
        if kind == _HAWKES:
            B = mu + S_prop
        elif kind == _POISSON:
            B = rate0
        else:
            B = rate_up if flag == 1 else rate_down

        if bi == _BLOCK:
            buf = gen.random(_BLOCK).tolist()
            bi = 0
        t_cand = t_prop - math.log(1.0 - buf[bi]) / B
        bi += 1

        boundary = next_tr if next_tr < horizon else horizon
        if t_cand >= boundary:
            # No arrival in the segment; an exactly coincident candidate is
            # discarded so the endogenous transition is applied first.
            dt = boundary - t_seg
            if kind == _HAWKES:
                decay_seg = math.exp(-beta * dt)
                inc = mu * dt + (S / beta) * (1.0 - decay_seg)
            elif kind == _POISSON:
                inc = rate0 * dt
            else:
                inc = (rate_up if flag == 1 else rate_down) * dt
            if next_cp <= boundary:
                _fill_cps(boundary, False, n_ie, n_dmg)
            lam_acc += inc
            if flag == 0:
                lamD_acc += inc
                down_acc += dt
            else:
                up_acc += dt
            if boundary >= horizon:
                break
            if kind == _HAWKES:
                S *= decay_seg
            flag = 1 - flag
            next_tr = boundary + _draw(up_code if flag == 1 else down_code)
            events.append(EventRecord(boundary,
                                      PROTECTION_UP if flag == 1 else PROTECTION_DOWN,
                                      None, False, False))
            ev_lam.append(lam_acc)
            ev_lamD.append(lamD_acc)
            t_seg = boundary
            t_prop = boundary
            S_prop = S
            continue

        if kind == _HAWKES:
            S_cand = S_prop * math.exp(-beta * (t_cand - t_prop))
            lam_val = mu + S_cand
            if bi == _BLOCK:
                buf = gen.random(_BLOCK).tolist()
                bi = 0
            ua = buf[bi]
            bi += 1
            if ua * B > lam_val:
                # Rejected candidate; the decayed intensity is the new bound.
                t_prop = t_cand
                S_prop = S_cand
                continue
        # Constant-rate families have a tight bound: candidates always accept.

        dt = t_cand - t_seg
        if kind == _HAWKES:
            decay_seg = math.exp(-beta * dt)
            inc = mu * dt + (S / beta) * (1.0 - decay_seg)
        elif kind == _POISSON:
            inc = rate0 * dt
        else:
            inc = (rate_up if flag == 1 else rate_down) * dt
        if next_cp < t_cand:
            _fill_cps(t_cand, True, n_ie, n_dmg)
        lam_acc += inc
        if flag == 0:
            lamD_acc += inc
            down_acc += dt
        else:
            up_acc += dt

        left = flag
        caused = False
        if flag == 1 and q > 0.0:
            if bi == _BLOCK:
                buf = gen.random(_BLOCK).tolist()
                bi = 0
            uc = buf[bi]
            bi += 1
            if uc < q:
                caused = True
                flag = 0
                next_tr = t_cand + _draw(down_code)
        damage = (left == 0) or (caused and damage_on_caused)
        n_ie += 1
        if left == 0:
            n_left0 += 1
        if caused:
            n_caused += 1
        if damage:
            n_dmg += 1
        if kind == _HAWKES:
            S = S * decay_seg + alpha

        events.append(EventRecord(t_cand, INITIATING_EVENT, left, damage, caused))
        ev_lam.append(lam_acc)
        ev_lamD.append(lamD_acc)
        if next_cp == t_cand:
            # A grid time landing exactly on the jump records the post-jump
            # counts (counting processes are right-continuous).
            cp_n[cp_i] = n_ie
            cp_nd[cp_i] = n_dmg
            cp_lam[cp_i] = lam_acc
            cp_lamD[cp_i] = lamD_acc
            cp_down[cp_i] = down_acc
            cp_i += 1
            next_cp = cp_t[cp_i] if cp_i < ncp else math.inf
        t_seg = t_cand
        t_prop = t_cand
        S_prop = S

    grid = None
    if ncp:
        grid = CheckpointGrid(
            times=np.asarray(cp_t),
            n_events=cp_n,
            n_damage=cp_nd,
            lambda_total=cp_lam,
            lambda_damage=cp_lamD,
            downtime=cp_down,
        )
    return Trajectory(
        scenario=scenario,
        replication_index=replication_index,
        horizon=horizon,
        events=events,
        lambda_total=lam_acc,
        lambda_damage=lamD_acc,
        uptime_integral=up_acc,
        n_events=n_ie,
        n_damage=n_dmg,
        n_left_limit_down=n_left0,
        n_caused_failures=n_caused,
        event_lambda_total=ev_lam,
        event_lambda_damage=ev_lamD,
        intensity_realized=model,
        checkpoints=grid,
    )


def flag_segments(trajectory: Trajectory) -> Iterator[tuple[float, float, int]]:
    """Yield ``(start, end, flag)`` for the piecewise-constant left-limit
    protection path reconstructed from the event log."""
    flag = 0 if trajectory.scenario.protection.always_down else 1
    start = 0.0
    for ev in trajectory.events:
        if ev.time > start:
            yield start, ev.time, flag
            start = ev.time
        if ev.kind == PROTECTION_DOWN:
            flag = 0
        elif ev.kind == PROTECTION_UP:
            flag = 1
        elif ev.caused_failure:
            flag = 0
    if trajectory.horizon > start:
        yield start, trajectory.horizon, flag


def _segment_table(events: list[EventRecord], horizon: float, always_down: bool,
                   model: IntensityModel):
    """Per-segment arrays: bounds, left-limit flag, and excitation at start."""
    times = [ev.time for ev in events]
    for i in range(1, len(times)):
        if times[i] <= times[i - 1]:
            raise ValueError("event log not sorted: cannot replay compensators")
    starts = [0.0] + times
    ends = times + [horizon]

    flags = np.empty(len(starts), dtype=np.int64)
    flag = 0 if always_down else 1
    excit = np.zeros(len(starts))
    is_hawkes = isinstance(model, HawkesIntensity)
    S = 0.0
    beta = model.beta if is_hawkes else 0.0
    alpha = model.alpha if is_hawkes else 0.0
    exp = math.exp
    prev = 0.0
    for i, ev in enumerate(events):
        flags[i] = flag
        kind = ev.kind
        if is_hawkes:
            S *= exp(-beta * (ev.time - prev))
            if kind == INITIATING_EVENT:
                S += alpha
            prev = ev.time
            excit[i + 1] = S
        if kind == PROTECTION_DOWN:
            flag = 0
        elif kind == PROTECTION_UP:
            flag = 1
        elif ev.caused_failure:
            flag = 0
    flags[len(events)] = flag
    return np.asarray(starts), np.asarray(ends), flags, excit


def replay_compensator(trajectory: Trajectory, scenario: Optional[Scenario] = None,
                       quadrature: str = "fixed") -> tuple[float, float]:
    """Recompute both cumulative hazards from the event log by quadrature.

    ``fixed`` integrates each inter-event segment with composite
    Gauss-Legendre panels sized to the decay scale; ``adaptive`` calls
    adaptive quadrature on the pointwise intensity per segment (slow, used
    as the reference for the fixed rule). Returns ``(lambda_total,
    lambda_damage)``.
    """
    if scenario is None:
        scenario = trajectory.scenario
    model = trajectory.intensity_realized
    starts, ends, flags, excit = _segment_table(
        trajectory.events, trajectory.horizon, scenario.protection.always_down, model)
    lengths = ends - starts
    keep = lengths > 0.0
    starts, ends, flags, excit, lengths = (
        starts[keep], ends[keep], flags[keep], excit[keep], lengths[keep])

    if quadrature == "adaptive":
        from scipy.integrate import quad

        total = 0.0
        damage = 0.0
        for a, b, fl, S in zip(starts, ends, flags, excit):
            state = IntensityState(excitation=float(S), protection_flag=int(fl))
            val, _ = quad(lambda u, a0=a, st=state: evaluate(model, st, u - a0), a, b,
                          epsabs=1e-13, epsrel=1e-13, limit=200)
            total += val
            if fl == 0:
                damage += val
        return total, damage
    if quadrature != "fixed":
        raise ValueError(f"unknown quadrature mode {quadrature!r}")

    if isinstance(model, HawkesIntensity):
        beta = model.beta
        # Panels no longer than ~4 decay constants keep the rule exact to
        # well past the comparison tolerance.
        panels = np.maximum(1, np.ceil(beta * lengths / 4.0).astype(np.int64))
        offsets = np.concatenate([np.arange(k) for k in panels]).astype(float)
        plen = np.repeat(lengths / panels, panels)
        pa = np.repeat(starts, panels) + offsets * plen
        S_pa = np.repeat(excit, panels) * np.exp(-beta * (pa - np.repeat(starts, panels)))
        nodes = plen[:, None] * _GL_X[None, :]
        vals = model.mu + S_pa[:, None] * np.exp(-beta * nodes)
        integrals = plen * (vals @ _GL_W)
        total = float(integrals.sum())
        down = np.repeat(flags, panels) == 0
        damage = float(integrals[down].sum())
        return total, damage

    if isinstance(model, PoissonIntensity):
        rates = np.full(len(starts), model.rate)
    else:
        rates = np.where(flags == 1, model.rate_up, model.rate_down)
    nodes = lengths[:, None] * _GL_X[None, :]
    vals = np.broadcast_to(rates[:, None], nodes.shape)
    integrals = lengths * (vals @ _GL_W)
    total = float(integrals.sum())
    damage = float(integrals[flags == 0].sum())
    return total, damage


def write_event_log(trajectory: Trajectory, path) -> None:
    """Emit the event-log CSV: time,kind,left_limit_flag,is_damage,caused_failure.

    Times carry 9 significant digits; booleans are written as 0/1; the flag
    column is empty for protection transitions.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "kind", "left_limit_flag", "is_damage", "caused_failure"])
        for ev in trajectory.events:
            writer.writerow([
                format(ev.time, ".9g"),
                ev.kind,
                "" if ev.left_limit_flag is None else ev.left_limit_flag,
                int(ev.is_damage),
                int(ev.caused_failure),
            ])


def read_event_log(path) -> list[EventRecord]:
    """Parse an event-log CSV back into records."""
    records: list[EventRecord] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        expected = ["time", "kind", "left_limit_flag", "is_damage", "caused_failure"]
        if reader.fieldnames != expected:
            raise ValueError(f"unexpected event-log header: {reader.fieldnames}")
        for row in reader:
            if row["kind"] not in (INITIATING_EVENT, PROTECTION_DOWN, PROTECTION_UP):
                raise ValueError(f"unknown event kind {row['kind']!r}")
            records.append(EventRecord(
                time=float(row["time"]),
                kind=row["kind"],
                left_limit_flag=None if row["left_limit_flag"] == "" else int(row["left_limit_flag"]),
                is_damage=bool(int(row["is_damage"])),
                caused_failure=bool(int(row["caused_failure"])),
            ))
    return records
