"""Step-response and steady-state characterization of converter behavior.

Implements the desk procedure used to identify a black-box converter's
control loops: fit a first-order time constant to a monotone step segment
(63.2 % crossing, with an exponential least-squares cross-check), fit a
droop line to steady-state sweep points, and fit a ramp rate to a voltage
slope.  ``characterize_model`` runs the whole battery against the simulated
model; the same fitters accept imported measurement records with arbitrary
(even irregular) sampling.

Bandwidths are reported in both conventions: ``bw_inv_tau = 1/tau`` (the
convention used by the published step-response figures) and
``bw_standard = 1/(2*pi*tau)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit

from .errors import DegenerateDataError, NonFirstOrderError, NoStepError
from .plant import ConverterParams
from .sim import (
    DROOP_VP,
    Event,
    Scenario,
    SimTrace,
    run_current_step,
    run_scenario,
)

CROSSING_FRACTION = 0.632


@dataclass(frozen=True)
class StepFit:
    t_step: float
    y0: float
    y_inf: float
    tau: float
    bw_inv_tau: float      # 1/tau
    bw_standard: float   # 1/(2*pi*tau)
    rms_residual: float


@dataclass(frozen=True)
class DroopFit:
    slope: float       # positive for drooping data [V/W or V/A]
    intercept: float   # no-load voltage [V]
    r_squared: float


def _as_arrays(t, y):
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.ndim != 1 or t.shape != y.shape or len(t) < 3:
        raise ValueError("need matching 1-D time/signal arrays with >= 3 samples")
    return t, y


def fit_time_constant(
    t,
    y,
    t_step: float,
    settle_window: float,
    noise_floor: float = 1e-6,
) -> StepFit:
    """First-order fit of a step response via the 63.2 % crossing.

    y0 is the mean of the 10 samples preceding t_step, y_inf the mean over
    the final quarter of the settle window, and tau the interpolated time at
    which the signal first crosses y0 + 0.632*(y_inf - y0).  An exponential
    least-squares refinement is run as a cross-check; its RMS misfit is
    reported in rms_residual.
    """
    t, y = _as_arrays(t, y)
    if settle_window <= 0.0:
        raise ValueError("settle_window must be positive")
    if t_step < t[0] or t_step + settle_window > t[-1] + 1e-12:
        raise ValueError("trace does not cover [t_step, t_step + settle_window]")

    before = np.nonzero(t < t_step)[0]
    if len(before) < 1:
        raise ValueError("no samples before t_step")
    y0 = float(np.mean(y[before[-10:]]))

    win = (t >= t_step) & (t <= t_step + settle_window)
    t_w, y_w = t[win], y[win]
    tail = t_w >= t_step + 0.75 * settle_window
    y_inf = float(np.mean(y_w[tail]))

    span = y_inf - y0
    scale = max(abs(y0), abs(y_inf), 1e-300)
    if abs(span) <= noise_floor * scale:
        raise NoStepError(
            f"|y_inf - y0| = {abs(span):.3g} is below the noise floor at t = {t_step:g} s"
        )

    target = y0 + CROSSING_FRACTION * span
    rel = (y_w - target) * math.copysign(1.0, span)
    above = np.nonzero(rel >= 0.0)[0]
    if len(above) == 0 or above[0] == 0:
        raise NonFirstOrderError(
            "63.2 % crossing not found inside the settle window; "
            "response is not first-order-like"
        )
    k = above[0]
    t_cross = t_w[k - 1] + (t_w[k] - t_w[k - 1]) * (target - y_w[k - 1]) / (y_w[k] - y_w[k - 1])
    tau = float(t_cross - t_step)
    if tau <= 0.0:
        raise NonFirstOrderError("crossing precedes the step; signal is not monotone")

    def model(tt, tau_fit):
        return y_inf + (y0 - y_inf) * np.exp(-(tt - t_step) / tau_fit)

    try:
        popt, _ = curve_fit(model, t_w, y_w, p0=[tau], maxfev=200)
        tau_ls = float(abs(popt[0]))
    except (RuntimeError, ValueError):
        tau_ls = tau
    rms = float(np.sqrt(np.mean((y_w - model(t_w, tau_ls)) ** 2)))

    return StepFit(
        t_step=float(t_step),
        y0=y0,
        y_inf=y_inf,
        tau=tau,
        bw_inv_tau=1.0 / tau,
        bw_standard=1.0 / (2.0 * math.pi * tau),
        rms_residual=rms,
    )


def fit_droop_slope(points) -> DroopFit:
    """Ordinary least squares of settled voltage against load (W or A).

    Fits v = intercept - slope*x and reports the slope positive for
    drooping data.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise ValueError("need >= 2 (x, v) pairs")
    x, v = pts[:, 0], pts[:, 1]
    if np.all(x == x[0]):
        raise DegenerateDataError("all load values identical; droop slope is undetermined")
    A = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(A, v, rcond=None)
    intercept, b = float(coef[0]), float(coef[1])
    resid = v - (intercept + b * x)
    ss_res = float(np.sum(resid ** 2))
    ss_tot = float(np.sum((v - v.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return DroopFit(slope=-b, intercept=intercept, r_squared=max(0.0, min(1.0, r2)))


def fit_ramp_rate(t, v, t_start: float, t_end_: float) -> float:
    """Least-squares slope of v(t) over [t_start, t_end] in V/s."""
    t, v = _as_arrays(t, v)
    m = (t >= t_start) & (t <= t_end_)
    if int(m.sum()) < 3:
        raise ValueError("ramp window shorter than 3 samples")
    coef = np.polyfit(t[m], v[m], 1)
    return float(coef[0])


@dataclass(frozen=True)
class CharacterizationReport:
    current_loop: StepFit
    droop_lpf: StepFit
    droop: DroopFit
    ramp_rate: float

    def as_key_values(self) -> list[str]:
        c, d = self.current_loop, self.droop_lpf
        return [
            f"current_loop_tau_s={c.tau!r}",
            f"current_loop_bw_hz={c.bw_inv_tau!r}",
            f"current_loop_bw_standard_hz={c.bw_standard!r}",
            f"droop_lpf_tau_s={d.tau!r}",
            f"droop_lpf_bw_hz={d.bw_inv_tau!r}",
            f"droop_lpf_bw_standard_hz={d.bw_standard!r}",
            f"droop_slope={self.droop.slope!r}",
            f"droop_intercept_v={self.droop.intercept!r}",
            f"droop_r_squared={self.droop.r_squared!r}",
            f"ramp_rate_v_per_s={self.ramp_rate!r}",
        ]


def _current_loop_fit(params: ConverterParams, i_step: float = 5.0) -> StepFit:
    # probe around a ~5 A standing current so the reference step is the
    # familiar 5 -> 10 A one
    p0 = 5.0 * params.e_src
    t_step, window = 5e-4, 2e-3
    tr = run_current_step(params, p_load=p0, i_step=i_step,
                          t_step=t_step, t_end=t_step + window + 5e-4, dt=1e-6)
    return fit_time_constant(tr.t, tr.i_l, t_step, window)


def _droop_transient_fit(params: ConverterParams, coefficient: float) -> StepFit:
    t_on = 0.05
    ev = (Event(t=t_on, action="set_droop", mode=DROOP_VP, coefficient=coefficient),)
    sc = Scenario(params=params, dt=1e-6, t_end=t_on + 0.06, p_load0=3600.0,
                  decimation=10, events=ev)
    tr = run_scenario(sc)
    return fit_time_constant(tr.t, tr.v_bus, t_on, 0.05)


def _droop_sweep_fit(params: ConverterParams, powers) -> DroopFit:
    pts = []
    for p in powers:
        ev = (Event(t=0.0, action="set_droop", mode=DROOP_VP, coefficient=params.k_vp),)
        sc = Scenario(params=params, dt=1e-6, t_end=0.25, p_load0=float(p),
                      decimation=100, events=ev)
        tr = run_scenario(sc)
        tail = tr.t >= 0.9 * tr.t[-1]
        pts.append((float(p), float(np.mean(tr.v_bus[tail]))))
    return fit_droop_slope(pts)


def _ramp_restore(params: ConverterParams, coefficient: float) -> tuple[SimTrace, float, float]:
    """Droop-enable then reference-restore run; returns (trace, t_restore, drop)."""
    drop = coefficient * 3600.0
    t_on, t_restore = 0.2, 0.5
    t_ramp = drop / params.ramp
    ev = (
        Event(t=t_on, action="set_droop", mode=DROOP_VP, coefficient=coefficient),
        Event(t=t_restore, action="set_vref", value=params.v_nl + drop),
    )
    sc = Scenario(params=params, dt=1e-6, t_end=t_restore + t_ramp + 0.4,
                  p_load0=3600.0, decimation=100, events=ev)
    return run_scenario(sc), t_restore, drop


def characterize_model(
    params: ConverterParams,
    droop_transient_coefficient: float = 60.0 / 3600.0,
    sweep_powers=(900.0, 1800.0, 2700.0, 3600.0),
) -> CharacterizationReport:
    """Run the full identification battery against the simulated model.

    Four experiments: a current-reference step for the inner loop time
    constant, a droop-enable transient for the droop filter, a steady-state
    droop sweep (at the configured k_vp) for the slope, and a reference
    restore for the ramp rate.
    """
    cur = _current_loop_fit(params)
    lpf = _droop_transient_fit(params, droop_transient_coefficient)
    droop = _droop_sweep_fit(params, sweep_powers)
    tr, t_restore, drop = _ramp_restore(params, droop_transient_coefficient)
    t_ramp = drop / params.ramp
    rate = fit_ramp_rate(tr.t, tr.v_bus, t_restore + 0.1 * t_ramp, t_restore + 0.9 * t_ramp)
    return CharacterizationReport(current_loop=cur, droop_lpf=lpf, droop=droop, ramp_rate=rate)
