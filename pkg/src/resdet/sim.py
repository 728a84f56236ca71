"""Simulation orchestration: single runs, Monte-Carlo ensembles, measurements.

A Scenario bundles a validated closed-loop model, a tuned detector, an
optional attack plan, and the run geometry (steps, burn-in before the
attack, seed, ensemble size).  `run` produces a full single-run trace;
`run_ensemble` advances all Monte-Carlo runs in lockstep as (n, runs)
matrix states, which keeps 200x1000-step ensembles in the
fraction-of-a-second range while sharing the exact same dynamics code as
the sequential path.

Measurement helpers compare the ensemble-mean state against the predicted
steady-state deviation, smooth per-run norms the way trace figures usually
do (trailing moving average), and tabulate the windowed-threshold
per-step budget beta(ell)/ell whose large-window limit ties the windowed
detector to the CUSUM one.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import attacks as attacks_mod
from . import detectors as det_mod
from . import model as model_mod
from .attacks import AttackPlan
from .model import ClosedLoopModel

__all__ = [
    "Scenario",
    "SimulationTrace",
    "EnsembleResult",
    "run",
    "run_ensemble",
    "moving_average",
    "measure_steady_deviation",
    "steady_deviation_estimate",
    "stationarity_gap",
    "sweep_window_contours",
]


@dataclass(frozen=True)
class Scenario:
    """One experiment: model + detector + optional attack + run geometry.

    The attack (when present) starts right after the burn-in:
    k_star = burn_in + 1.  The detector instance is a prototype; every run
    monitors with a fresh copy.
    """

    model: ClosedLoopModel
    detector: object
    plan: Optional[AttackPlan] = None
    steps: int = 1000
    burn_in: int = 50
    seed: int = 0
    mc_runs: int = 200
    tail_fraction: float = 0.5

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError("steps must be nonnegative")
        if not (0 <= self.burn_in) or (self.steps > 0 and self.burn_in >= self.steps):
            raise ValueError("burn_in must satisfy 0 <= burn_in < steps")
        if self.mc_runs < 1:
            raise ValueError("mc_runs must be >= 1")
        if not (0.0 < self.tail_fraction <= 1.0):
            raise ValueError("tail_fraction must lie in (0, 1]")
        if self.attacked and self.plan.k_star != self.burn_in + 1:
            raise ValueError(
                f"plan starts at k={self.plan.k_star} but burn_in={self.burn_in} "
                f"implies k_star={self.burn_in + 1}"
            )

    @property
    def attacked(self) -> bool:
        return self.plan is not None and self.plan.kind != "none"

    @property
    def k_star(self) -> Optional[int]:
        return self.plan.k_star if self.attacked else None


def _steady_start(plan: AttackPlan) -> int:
    """First step of the attack's steady phase (transient fully flushed).

    chi2 saturates immediately; the windowed statistic needs ell - 1 more
    steps until the evaluation window holds only attacked samples; the
    CUSUM may emit one alarm at k*+1 (the corner case where the pre-attack
    statistic exceeded the bias), settled by k*+2.
    """
    if plan.kind == "chi2":
        return plan.k_star
    if plan.kind in ("windowed-static", "windowed-pulse"):
        return plan.k_star + plan.ell - 1
    if plan.kind == "cusum":
        return plan.k_star + 2
    raise ValueError(f"plan kind {plan.kind!r} has no attack phases")


@dataclass
class SimulationTrace:
    """Complete record of one run; row i describes step k = i + 1."""

    k: np.ndarray
    x: np.ndarray
    e: np.ndarray
    r: np.ndarray
    z: np.ndarray
    stat: np.ndarray
    alarm: np.ndarray
    attack_active: np.ndarray
    events: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    @property
    def norm_x(self) -> np.ndarray:
        return np.linalg.norm(self.x, axis=1)


def _phase_counts(alarm_steps: np.ndarray, plan: Optional[AttackPlan]) -> dict:
    """Alarm counts split into pre-attack / transient / steady phases."""
    total = int(alarm_steps.size)
    if plan is None or plan.kind == "none":
        return {"alarms": total, "alarms_pre_attack": total, "alarms_transient": 0, "alarms_steady": 0}
    steady = _steady_start(plan)
    pre = int((alarm_steps < plan.k_star).sum())
    transient = int(((alarm_steps >= plan.k_star) & (alarm_steps < steady)).sum())
    return {
        "alarms": total,
        "alarms_pre_attack": pre,
        "alarms_transient": transient,
        "alarms_steady": total - pre - transient,
    }


def run(scenario: Scenario) -> SimulationTrace:
    """Simulate one run sequentially with a live detector.

    Deterministic given the scenario seed (the single run consumes the
    (seed, 0) noise substream, matching ensemble member 0).
    """
    model = scenario.model
    plan = scenario.plan if scenario.attacked else None
    steps = scenario.steps
    n, p = model.n, model.p

    detector = scenario.detector.fresh()
    noise = model.noise(scenario.seed, run=0)
    v_all, eta_all = noise.blocks(steps)

    x = np.zeros(n)
    xhat = np.zeros(n)
    out_x = np.empty((steps, n))
    out_e = np.empty((steps, n))
    out_r = np.empty((steps, p))
    out_z = np.empty(steps)
    out_stat = np.empty(steps)
    out_alarm = np.zeros(steps, dtype=bool)
    out_active = np.zeros(steps, dtype=bool)
    events = []

    for t in range(steps):
        k = t + 1
        e = x - xhat
        delta = None
        if plan is not None and k >= plan.k_star:
            delta = attacks_mod.synthesize_attack(plan, model, k, e, eta_all[t], detector)
            out_active[t] = True
        out_x[t] = x
        out_e[t] = e
        x, xhat, r, z = model_mod.advance(model, x, xhat, v_all[t], eta_all[t], delta)
        event = detector.update(z)
        out_r[t] = r
        out_z[t] = z
        out_stat[t] = detector.s if isinstance(detector, det_mod.CusumDetector) else (
            detector.w if isinstance(detector, det_mod.WindowedChiSqDetector) else z
        )
        if event is not None:
            out_alarm[t] = True
            events.append(event)

    trace = SimulationTrace(
        k=np.arange(1, steps + 1),
        x=out_x,
        e=out_e,
        r=out_r,
        z=out_z,
        stat=out_stat,
        alarm=out_alarm,
        attack_active=out_active,
        events=events,
    )
    trace.summary = _phase_counts(trace.k[trace.alarm], plan)
    if plan is not None and steps >= plan.k_star:
        span = steps - plan.k_star + 1
        tail = max(1, int(round(scenario.tail_fraction * span)))
        trace.summary["steady_estimate"] = float(
            np.linalg.norm(out_x[steps - tail:].mean(axis=0))
        )
    return trace


@dataclass
class EnsembleResult:
    """Vectorized Monte-Carlo ensemble output.

    mean_x[i] is the across-run mean state at step i + 1; z, stat, alarm
    are (runs, steps) arrays replayed through the detector semantics.
    """

    scenario: Scenario
    mean_x: np.ndarray
    z: np.ndarray
    stat: np.ndarray
    alarm: np.ndarray

    @property
    def runs(self) -> int:
        return self.z.shape[0]

    @property
    def steps(self) -> int:
        return self.z.shape[1]

    def phase_counts(self) -> dict:
        plan = self.scenario.plan if self.scenario.attacked else None
        ks = np.tile(np.arange(1, self.steps + 1), (self.runs, 1))
        return _phase_counts(ks[self.alarm], plan)


def run_ensemble(scenario: Scenario) -> EnsembleResult:
    """Simulate the Monte-Carlo ensemble in lockstep.

    Run i consumes the (seed, i) substream, so results are bitwise
    reproducible and independent of scheduling; detector statistics and
    alarms are recovered from the z matrix by the vectorized scans, which
    are property-tested equal to the sequential detector classes.
    """
    model = scenario.model
    plan = scenario.plan if scenario.attacked else None
    steps, runs = scenario.steps, scenario.mc_runs
    n, p = model.n, model.p

    v_all = np.empty((runs, steps, n))
    eta_all = np.empty((runs, steps, p))
    for i in range(runs):
        v_all[i], eta_all[i] = model.noise(scenario.seed, run=i).blocks(steps)

    # Live per-run state only the dynamic schedules need.
    needs_pending = (
        plan is not None
        and plan.kind == "windowed-static"
        and plan.saturation_mode == "greedy"
    )
    needs_s = plan is not None and plan.kind == "cusum" and plan.exact_first_step
    recent: deque = deque(maxlen=plan.ell - 1) if needs_pending and plan.ell > 1 else deque(maxlen=0)
    s_vec = np.zeros(runs) if needs_s else None

    x = np.zeros((n, runs))
    xhat = np.zeros((n, runs))
    mean_x = np.empty((steps, n))
    z_all = np.empty((runs, steps))

    sigma_sqrt = model.sigma_sqrt
    c = model.plant.c
    direction = plan.direction if plan is not None else None

    for t in range(steps):
        k = t + 1
        eta = eta_all[:, t, :].T
        delta = None
        if plan is not None and k >= plan.k_star:
            if needs_pending:
                pending = sum(recent) if len(recent) else np.zeros(runs)
                energy = attacks_mod.attack_energy(plan, k, pending_window_sum=pending)
            elif needs_s and k == plan.k_star:
                energy = attacks_mod.attack_energy(plan, k, s_prev=s_vec)
            else:
                energy = attacks_mod.attack_energy(plan, k)
            psi = direction[:, None] * np.sqrt(np.broadcast_to(energy, (runs,)))[None, :]
            delta = -(c @ (x - xhat)) - eta + sigma_sqrt @ psi
        mean_x[t] = x.mean(axis=1)
        x, xhat, _, z = model_mod.advance(model, x, xhat, v_all[:, t, :].T, eta, delta)
        z_all[:, t] = z
        if needs_pending and recent.maxlen:
            recent.append(z.copy())
        if needs_s:
            fired = s_vec > plan.tau
            s_vec = np.where(fired, 0.0, np.maximum(0.0, s_vec + z - plan.b))

    stat, alarm = det_mod.scan_for(scenario.detector, z_all)
    return EnsembleResult(scenario=scenario, mean_x=mean_x, z=z_all, stat=stat, alarm=alarm)


def moving_average(series, w: int) -> np.ndarray:
    """Trailing moving average over min(k, w) samples; length-preserving."""
    if int(w) < 1:
        raise ValueError("window must be >= 1")
    s = np.asarray(series, dtype=float)
    if s.ndim != 1:
        raise ValueError("series must be 1-D")
    w = int(w)
    cs = np.cumsum(s)
    out = cs.copy()
    out[w:] = cs[w:] - cs[:-w]
    counts = np.minimum(np.arange(1, s.size + 1), w)
    return out / counts


def steady_deviation_estimate(result: EnsembleResult, tail_fraction: Optional[float] = None) -> float:
    """||mean over runs and tail steps of x_k||, the measured steady deviation."""
    scenario = result.scenario
    if not scenario.attacked:
        raise ValueError("no prediction available: scenario has no attack")
    frac = scenario.tail_fraction if tail_fraction is None else tail_fraction
    if not (0.0 < frac <= 1.0):
        raise ValueError("tail_fraction must lie in (0, 1]")
    k_star = scenario.plan.k_star
    span = result.steps - k_star + 1
    if span < 1:
        raise ValueError("trace ends before the attack starts")
    tail = max(1, int(round(frac * span)))
    return float(np.linalg.norm(result.mean_x[result.steps - tail:].mean(axis=0)))


def measure_steady_deviation(result: EnsembleResult, tail_fraction: Optional[float] = None):
    """Measured vs. predicted steady-state deviation.

    Returns:
        (measured, predicted, relative_error).  The measured value is the
        norm of the ensemble-and-tail mean state (expectation inside the
        norm); predicted is the matching closed-form bound for the plan.

    Raises:
        ValueError: "no prediction available" for attack-free scenarios,
            and for the pulsed windowed schedule which has no
            constant-forcing bound.
    """
    measured = steady_deviation_estimate(result, tail_fraction)
    predicted = attacks_mod.predicted_deviation(result.scenario.model, result.scenario.plan).gamma
    if predicted > 0.0:
        rel = abs(measured - predicted) / predicted
    else:
        rel = abs(measured)  # absolute fallback: no scale to normalize by
    return measured, predicted, rel


def stationarity_gap(result: EnsembleResult) -> float:
    """Relative gap between the last-10% and last-50% deviation estimates.

    Small values certify the attacked ensemble mean has settled within the
    measured tail.
    """
    dev_10 = steady_deviation_estimate(result, tail_fraction=0.1)
    dev_50 = steady_deviation_estimate(result, tail_fraction=0.5)
    return abs(dev_10 - dev_50) / max(abs(dev_50), 1e-300)


def sweep_window_contours(p: int, a_star_list, ell_max: int):
    """Threshold-budget table: rows (far, ell, beta, beta/ell).

    ell covers 1..min(100, ell_max) densely, then log-spaced integers up to
    ell_max.  beta(ell)/ell is the per-step statistic budget of the
    windowed detector; as ell grows it converges to p, the CUSUM's
    tightest admissible bias.
    """
    if int(ell_max) < 1:
        raise ValueError("window must be >= 1")
    rates = list(a_star_list)
    for a_star in rates:
        if not (0.0 < float(a_star) < 1.0):
            raise ValueError(f"false-alarm rate must lie in (0, 1), got {a_star}")
    ells = list(range(1, min(100, int(ell_max)) + 1))
    if ell_max > 100:
        extra = np.unique(
            np.round(np.logspace(math.log10(101), math.log10(ell_max), 60)).astype(int)
        )
        ells.extend(int(e) for e in extra if e > 100)
    rows = []
    for a_star in rates:
        for ell in ells:
            beta = det_mod.tune_windowed(p, ell, float(a_star))
            rows.append((float(a_star), int(ell), beta, beta / ell))
    return rows
