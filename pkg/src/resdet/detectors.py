"""Residual-based anomaly detectors over the distance measure z_k.

Three detectors monitor the whitened residual energy z_k = r_k' Sigma^-1 r_k
(chi-squared with p degrees of freedom when no attack is present):

* static chi-squared: alarm when z_k > alpha;
* windowed chi-squared: alarm when the sum of the last ell values exceeds
  beta (chi-squared with p*ell degrees of freedom attack-free);
* CUSUM: S_k accumulates z_k - b clamped at zero; the alarm is declared on
  the update after S exceeds tau, consuming that sample in the reset.

Alarms use strict inequality; a statistic exactly at its threshold is not
an alarm.  Thresholds for the first two come in closed form from the
inverse regularized lower incomplete gamma function; the CUSUM threshold
has no closed form and is tuned by Monte-Carlo bisection on simulated
attack-free streams.

Each detector exists twice, deliberately: as a stateful single-stream
class (`update` one z at a time, the reference semantics) and as a
vectorized scan over (runs, steps) arrays used by tuning and Monte-Carlo
estimation.  Tests hold the two implementations to identical alarm
sequences.
"""

from __future__ import annotations

import math
import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import model as model_mod
from . import numerics

__all__ = [
    "AlarmEvent",
    "ChiSqDetector",
    "WindowedChiSqDetector",
    "CusumDetector",
    "make_detector",
    "tune_chi2",
    "tune_windowed",
    "tune_cusum_tau",
    "scan_chi2",
    "scan_windowed",
    "scan_cusum",
    "scan_for",
    "measure_alarm_rate",
    "estimate_arl",
    "RateEstimate",
    "ArlResult",
]

# Running window sums are refreshed from the buffer at this cadence so
# float drift from incremental add/subtract stays bounded on long streams.
_WINDOW_REFRESH = 1024


@dataclass(frozen=True)
class AlarmEvent:
    """A raised alarm: the step blamed (k_star), detector kind, statistic value."""

    k_star: int
    kind: str
    statistic: float


class ChiSqDetector:
    """Static chi-squared detector: alarm iff z > alpha, memoryless."""

    kind = "chi2"

    def __init__(self, alpha: float):
        if not (alpha > 0):
            raise ValueError(f"alpha must be positive, got {alpha}")
        self.alpha = float(alpha)
        self.k = 0

    def update(self, z: float) -> Optional[AlarmEvent]:
        if z < 0:
            raise ValueError(f"distance measure must be nonnegative, got {z}")
        self.k += 1
        if z > self.alpha:
            return AlarmEvent(k_star=self.k, kind=self.kind, statistic=float(z))
        return None

    def reset(self) -> None:
        self.k = 0

    def fresh(self) -> "ChiSqDetector":
        return ChiSqDetector(self.alpha)


class WindowedChiSqDetector:
    """Sliding-window chi-squared detector: alarm iff sum of last ell z's > beta.

    Alarms are suppressed until the window is full (the first ell - 1
    steps), so every evaluated statistic has the full chi-squared(p*ell)
    null distribution.  Before the window fills, `w` is the partial sum.
    """

    kind = "windowed"

    def __init__(self, beta: float, ell: int):
        if not (beta > 0):
            raise ValueError(f"beta must be positive, got {beta}")
        if int(ell) < 1:
            raise ValueError("window must be >= 1")
        self.beta = float(beta)
        self.ell = int(ell)
        self.window: deque = deque(maxlen=self.ell)
        self.w = 0.0
        self.k = 0

    def update(self, z: float) -> Optional[AlarmEvent]:
        if z < 0:
            raise ValueError(f"distance measure must be nonnegative, got {z}")
        self.k += 1
        if len(self.window) == self.ell:
            self.w -= self.window[0]  # evicted by the append below
        self.window.append(float(z))
        self.w += float(z)
        if self.k % _WINDOW_REFRESH == 0:
            self.w = math.fsum(self.window)
        if len(self.window) == self.ell and self.w > self.beta:
            return AlarmEvent(k_star=self.k, kind=self.kind, statistic=self.w)
        return None

    def reset(self) -> None:
        self.window.clear()
        self.w = 0.0
        self.k = 0

    def fresh(self) -> "WindowedChiSqDetector":
        return WindowedChiSqDetector(self.beta, self.ell)


class CusumDetector:
    """CUSUM detector on z with bias b and threshold tau.

    Update recursion: if the previous statistic already exceeded tau, this
    update declares the alarm (blaming the previous step, k_star = k - 1)
    and resets S to zero, consuming the current sample; otherwise
    S <- max(0, S + z - b).  The one-step alarm lag is the recursion's
    literal reset semantics, kept as-is.
    """

    kind = "cusum"

    def __init__(self, tau: float, b: float):
        if not (tau >= 0):
            raise ValueError(f"tau must be nonnegative, got {tau}")
        if not (b > 0):
            raise ValueError(f"bias b must be positive, got {b}")
        self.tau = float(tau)
        self.b = float(b)
        self.s = 0.0
        self.k = 0

    def update(self, z: float) -> Optional[AlarmEvent]:
        if z < 0:
            raise ValueError(f"distance measure must be nonnegative, got {z}")
        if self.s > self.tau:
            event = AlarmEvent(k_star=self.k, kind=self.kind, statistic=self.s)
            self.s = 0.0
            self.k += 1
            return event
        self.s = max(0.0, self.s + float(z) - self.b)
        self.k += 1
        return None

    def reset(self) -> None:
        self.s = 0.0
        self.k = 0

    def fresh(self) -> "CusumDetector":
        return CusumDetector(self.tau, self.b)


def make_detector(kind: str, **params):
    """Construct a detector by kind name: chi2 | windowed | cusum."""
    if kind == "chi2":
        return ChiSqDetector(alpha=params["alpha"])
    if kind == "windowed":
        return WindowedChiSqDetector(beta=params["beta"], ell=params["ell"])
    if kind == "cusum":
        return CusumDetector(tau=params["tau"], b=params["b"])
    raise ValueError(f"unknown detector kind {kind!r}")


# ---------------------------------------------------------------------------
# Threshold tuning


def tune_chi2(p: int, a_star: float) -> float:
    """Chi-squared threshold for a target per-step false-alarm rate.

    alpha is the (1 - a_star) quantile of chi-squared(p): the attack-free
    z exceeds it with probability a_star exactly.
    """
    if int(p) < 1:
        raise ValueError(f"sensor count must be >= 1, got {p}")
    if not (0.0 < a_star < 1.0):
        raise ValueError(f"false-alarm rate must lie in (0, 1), got {a_star}")
    return 2.0 * numerics.inverse_regularized_lower_gamma(p / 2.0, 1.0 - a_star)


def tune_windowed(p: int, ell: int, a_star: float) -> float:
    """Windowed threshold: the (1 - a_star) quantile of chi-squared(p*ell).

    Reduces to tune_chi2 at ell = 1.
    """
    if int(ell) < 1:
        raise ValueError("window must be >= 1")
    if int(p) < 1:
        raise ValueError(f"sensor count must be >= 1, got {p}")
    if not (0.0 < a_star < 1.0):
        raise ValueError(f"false-alarm rate must lie in (0, 1), got {a_star}")
    return 2.0 * numerics.inverse_regularized_lower_gamma(p * ell / 2.0, 1.0 - a_star)


def tune_cusum_tau(
    model: "model_mod.ClosedLoopModel",
    b: Optional[float] = None,
    a_star: float = 0.05,
    mc: int = 1_000_000,
    seed: int = 0,
    tol_rel: float = 0.05,
    full_output: bool = False,
):
    """Monte-Carlo CUSUM threshold for a target per-step alarm rate.

    There is no closed form for the CUSUM false-alarm rate, so tau is found
    by bisection: one attack-free ensemble of distance measures is
    simulated (about `mc` samples, deterministic given `seed`) and the
    alarm frequency is evaluated on that fixed stream at each candidate
    tau until it is within `tol_rel` (relative) of `a_star`.

    Args:
        model: closed loop whose attack-free residual stream to calibrate on.
        b: bias; defaults to p, the attack-free mean of z.  A bias below p
            lets the statistic drift upward ("bias too small" warning).
        a_star: target per-step alarm rate in (0, 1).
        mc: total sample budget, at least 1e5.
        seed: substream seed for the calibration ensemble.
        tol_rel: relative tolerance on the achieved rate.
        full_output: also return a diagnostics dict (achieved rate, bracket,
            iterations, sample count).

    Returns:
        tau, or (tau, info) when full_output is set.
    """
    if not (0.0 < a_star < 1.0):
        raise ValueError(f"false-alarm rate must lie in (0, 1), got {a_star}")
    if mc < 100_000:
        raise ValueError(f"sample budget too small for tuning, got {mc} (need >= 1e5)")
    p = model.p
    if b is None:
        b = float(p)
    b = float(b)
    if not (b > 0):
        raise ValueError(f"bias b must be positive, got {b}")
    if b < p:
        warnings.warn(
            f"bias too small: b={b} < p={p}; the statistic drifts upward "
            "and the per-step alarm rate loses meaning",
            stacklevel=2,
        )

    steps = 1000
    runs = max(1, math.ceil(mc / steps))
    z = model_mod.simulate_distance_stream(model, steps=steps, runs=runs, seed=seed, burn_in=50)
    samples = z.size

    def rate_at(tau: float) -> float:
        return scan_cusum(z, b, tau)[1].sum() / samples

    lo, rate_lo = 0.0, rate_at(0.0)
    if rate_lo < a_star:
        warnings.warn(
            f"rate unattainable: even tau -> 0 yields alarm rate {rate_lo:.4g} "
            f"< target {a_star:.4g} (bias b={b} too large for this target)",
            stacklevel=2,
        )
        tau = 0.0
        info = {"rate": rate_lo, "b": b, "bracket": (0.0, 0.0), "iterations": 0, "samples": samples}
        return (tau, info) if full_output else tau

    hi = max(1.0, b)
    while rate_at(hi) >= a_star:
        hi *= 2.0
        if hi > 1e12:
            raise RuntimeError("failed to bracket the CUSUM threshold")

    tau, rate = lo, rate_lo
    iterations = 0
    for iterations in range(1, 81):
        tau = 0.5 * (lo + hi)
        rate = rate_at(tau)
        if abs(rate - a_star) <= tol_rel * a_star:
            break
        if rate > a_star:
            lo = tau
        else:
            hi = tau
    else:
        warnings.warn(
            f"bisection stopped at alarm rate {rate:.4g} (target {a_star:.4g})",
            stacklevel=2,
        )

    info = {"rate": rate, "b": b, "bracket": (lo, hi), "iterations": iterations, "samples": samples}
    return (tau, info) if full_output else tau


# ---------------------------------------------------------------------------
# Vectorized scans (mirror the classes exactly; property-tested against them)


def scan_chi2(z: np.ndarray, alpha: float):
    """Alarm flags for a chi-squared detector over (..., steps) z arrays."""
    z = np.asarray(z, dtype=float)
    return z.copy(), z > alpha


def scan_windowed(z: np.ndarray, ell: int, beta: float):
    """Statistics and alarm flags for the windowed detector over (runs, steps).

    The statistic at column t is the sum of the last min(t+1, ell) values
    (partial sums during warm-up); alarms require a full window.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    ell = int(ell)
    cs = np.cumsum(z, axis=1)
    w = cs.copy()
    if ell <= z.shape[1]:
        w[:, ell:] = cs[:, ell:] - cs[:, :-ell]
    alarms = w > beta
    alarms[:, : ell - 1] = False  # window not yet full
    return w, alarms


def scan_cusum(z: np.ndarray, b: float, tau: float):
    """Statistics and alarm flags for the CUSUM detector over (runs, steps).

    stats[:, t] is S after consuming column t; alarms[:, t] marks updates
    that fired (i.e. the previous S exceeded tau; that update resets S and
    discards column t).
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    runs, steps = z.shape
    stats = np.empty_like(z)
    alarms = np.zeros(z.shape, dtype=bool)
    s = np.zeros(runs)
    for t in range(steps):
        fired = s > tau
        s = np.where(fired, 0.0, np.maximum(0.0, s + z[:, t] - b))
        alarms[:, t] = fired
        stats[:, t] = s
    return stats, alarms


# ---------------------------------------------------------------------------
# Monte-Carlo estimation


@dataclass(frozen=True)
class RateEstimate:
    """Per-step alarm frequency over an attack-free ensemble."""

    rate: float
    stderr: float
    alarms: int
    samples: int


def scan_for(detector, z: np.ndarray):
    """Dispatch to the matching vectorized scan for a detector instance."""
    if isinstance(detector, ChiSqDetector):
        return scan_chi2(z, detector.alpha)
    if isinstance(detector, WindowedChiSqDetector):
        return scan_windowed(z, detector.ell, detector.beta)
    if isinstance(detector, CusumDetector):
        return scan_cusum(z, detector.b, detector.tau)
    raise TypeError(f"unsupported detector type {type(detector).__name__}")


def measure_alarm_rate(
    model: "model_mod.ClosedLoopModel",
    detector,
    steps: int = 1000,
    runs: int = 1000,
    seed: int = 0,
    burn_in: int = 50,
) -> RateEstimate:
    """Empirical attack-free per-step alarm frequency of a tuned detector.

    Simulates `runs` independent attack-free streams of `steps` distance
    measures (after `burn_in`) and counts alarms.  The standard error uses
    between-run variation, which is honest for the windowed and CUSUM
    detectors whose alarm events are serially dependent within a run.
    """
    z = model_mod.simulate_distance_stream(model, steps=steps, runs=runs, seed=seed, burn_in=burn_in)
    _, alarms = scan_for(detector, z)
    if isinstance(detector, WindowedChiSqDetector):
        per_run_samples = max(0, steps - detector.ell + 1)
    else:
        per_run_samples = steps
    if per_run_samples == 0:
        return RateEstimate(rate=math.nan, stderr=math.nan, alarms=0, samples=0)
    run_rates = alarms.sum(axis=1) / per_run_samples
    rate = float(run_rates.mean())
    stderr = float(run_rates.std(ddof=1) / math.sqrt(runs)) if runs > 1 else math.nan
    return RateEstimate(
        rate=rate,
        stderr=stderr,
        alarms=int(alarms.sum()),
        samples=per_run_samples * runs,
    )


@dataclass(frozen=True)
class ArlResult:
    """Average run length to first exceedance on attack-free streams.

    The run length counts steps from a stationary (warmed-up) start until
    the detector statistic first exceeds its threshold.  Runs that reach
    `cap` without an exceedance enter the mean at the cap, so with
    censoring the reported ARL is a lower bound.
    """

    arl: float
    alarm_rate: float
    half_width: float
    runs: int
    censored: int
    cap: int


def estimate_arl(
    model: "model_mod.ClosedLoopModel",
    detector,
    runs: int = 400,
    seed: int = 0,
    cap: int = 1_000_000,
    warm_up: int = 50,
    chunk: int = 4096,
) -> ArlResult:
    """Monte-Carlo average run length of a tuned detector.

    Each run simulates the attack-free loop from the origin, discards
    `warm_up` steps, then counts steps until the detector statistic first
    exceeds its threshold (for the CUSUM that is the exceedance step; the
    emitted alarm trails it by one update).  Runs are capped at `cap`
    steps; censored runs are counted at the cap and flagged with a warning.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    if cap < 1:
        raise ValueError("cap must be >= 1")
    n, p = model.n, model.p
    noise_sources = [model.noise(seed, run=i) for i in range(runs)]

    def draw_chunk(width: int):
        v_all = np.empty((runs, width, n))
        eta_all = np.empty((runs, width, p))
        for i, src in enumerate(noise_sources):
            v_all[i], eta_all[i] = src.blocks(width)
        return v_all, eta_all

    x = np.zeros((n, runs))
    xhat = np.zeros((n, runs))
    if warm_up > 0:
        v_all, eta_all = draw_chunk(warm_up)
        for t in range(warm_up):
            x, xhat, _, _ = model_mod.advance(model, x, xhat, v_all[:, t, :].T, eta_all[:, t, :].T)

    lengths = np.full(runs, cap, dtype=np.int64)
    done = np.zeros(runs, dtype=bool)

    if isinstance(detector, ChiSqDetector):
        kind, threshold = "chi2", detector.alpha
    elif isinstance(detector, WindowedChiSqDetector):
        kind, threshold = "windowed", detector.beta
        tail = np.zeros((runs, 0))  # trailing ell-1 samples carried between chunks
    elif isinstance(detector, CusumDetector):
        kind, threshold = "cusum", detector.tau
        s = np.zeros(runs)
    else:
        raise TypeError(f"unsupported detector type {type(detector).__name__}")

    offset = 0  # completed post-warm-up steps
    while offset < cap and not done.all():
        width = min(chunk, cap - offset)
        v_all, eta_all = draw_chunk(width)
        z = np.empty((runs, width))
        for t in range(width):
            x, xhat, _, z_t = model_mod.advance(
                model, x, xhat, v_all[:, t, :].T, eta_all[:, t, :].T
            )
            z[:, t] = z_t

        if kind == "chi2":
            exceed = z > threshold
        elif kind == "windowed":
            ell = detector.ell
            glued = np.concatenate([tail, z], axis=1)
            tail_len = glued.shape[1] - width
            exceed = np.zeros((runs, width), dtype=bool)
            n_win = glued.shape[1] - ell + 1
            if n_win > 0:
                w = np.lib.stride_tricks.sliding_window_view(glued, ell, axis=1).sum(axis=-1)
                # window j spans glued columns [j, j+ell-1]; it ends at local
                # step j + ell - 1 - tail_len of this chunk.
                j0 = max(0, tail_len - ell + 1)
                t_local = np.arange(j0, n_win) + ell - 1 - tail_len
                exceed[:, t_local] = w[:, j0:] > threshold
            keep = min(ell - 1, glued.shape[1])
            tail = glued[:, glued.shape[1] - keep:]
        else:  # cusum
            exceed = np.zeros((runs, width), dtype=bool)
            for t in range(width):
                s = np.maximum(0.0, s + z[:, t] - detector.b)
                hit = s > threshold
                exceed[:, t] = hit
                s = np.where(hit, 0.0, s)  # start the next cycle after an exceedance

        hit_any = exceed.any(axis=1)
        first = np.where(hit_any, exceed.argmax(axis=1), 0)
        newly = hit_any & ~done
        lengths[newly] = offset + first[newly] + 1
        done |= hit_any
        offset += width

    censored = int((~done).sum())
    if censored:
        warnings.warn(
            f"{censored} of {runs} runs reached the {cap}-step cap without an "
            "exceedance; the reported ARL is a censored lower bound",
            stacklevel=2,
        )
    arl = float(lengths.mean())
    half_width = (
        float(1.96 * lengths.std(ddof=1) / math.sqrt(runs)) if runs > 1 else math.nan
    )
    return ArlResult(
        arl=arl,
        alarm_rate=1.0 / arl if arl > 0 else math.inf,
        half_width=half_width,
        runs=runs,
        censored=censored,
        cap=cap,
    )
