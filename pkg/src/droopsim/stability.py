"""Constant-power-load stability: capacitance/inductance bounds and onset
detection.

A CPL presents the negative incremental impedance -v**2/p, so a line
inductance L feeding a bus capacitance C needs enough damping from the
source's droop resistance K: the bus is stable while C > L/(K*Re) with
Re = v**2/p, equivalently while L < K*C*Re.  The predictor inverts that
boundary along the droop law v(p) = v_nl - k_vp*p to give the power at
which a given (L, C, K) network turns unstable; the detector finds the
matching onset in a simulated trace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .plant import ConverterParams
from .sim import SimTrace


def equivalent_cpl_impedance(v: float, p: float) -> float:
    """|Re| = v**2/p of the load's negative incremental impedance.

    Zero power is a valid query and returns +inf (an ideal open circuit),
    not an error.
    """
    if v <= 0.0:
        raise ValueError("voltage must be positive")
    if p < 0.0:
        raise ValueError("power must be non-negative")
    if p == 0.0:
        return math.inf
    return v * v / p


def min_capacitance(l: float, k: float, re: float) -> float:
    """Smallest stabilizing bus capacitance L/(K*Re)."""
    if min(l, k, re) <= 0.0:
        raise ValueError("l, k and re must be positive")
    return l / (k * re)


def max_inductance(k: float, c: float, re: float) -> float:
    """Largest tolerable line inductance K*C*Re."""
    if k <= 0.0 or re <= 0.0 or c < 0.0:
        raise ValueError("k and re must be positive, c non-negative")
    return k * c * re


def droop_voltage(params: ConverterParams, p: float) -> float:
    """Operating bus voltage v_nl - k_vp*p along the droop law."""
    return params.v_nl - params.k_vp * p


def predict_instability_power(
    params: ConverterParams,
    l: float,
    c: float,
    k: float,
    p_upper: float | None = None,
    rel_tol: float = 1e-4,
) -> float | None:
    """Smallest CPL power at which C = L/(K*Re(p)) along the droop law.

    Re is evaluated at the drooped operating voltage v(p) = v_nl - k_vp*p.
    Solved by bisection to 0.01 % relative tolerance; returns None when no
    boundary exists below p_upper (default: the power where droop has taken
    the voltage to half of v_nl, beyond which the linear droop law is
    meaningless).
    """
    if min(l, c, k) <= 0.0:
        raise ValueError("l, c and k must be positive")
    if p_upper is None:
        if params.k_vp > 0.0:
            p_upper = 0.5 * params.v_nl / params.k_vp
        else:
            # flat droop law: bracket the closed-form root c*k*v_nl^2/l
            p_upper = 2.0 * c * k * params.v_nl * params.v_nl / l
    if p_upper <= 0.0:
        raise ValueError("p_upper must be positive")
    if droop_voltage(params, p_upper) <= 0.0:
        raise ValueError("droop law reaches zero voltage inside the search range")

    def excess(p: float) -> float:
        # positive once the required minimum capacitance exceeds C
        v = droop_voltage(params, p)
        return p * l / (k * v * v) - c

    lo, hi = 0.0, p_upper
    if excess(hi) < 0.0:
        return None
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if excess(mid) >= 0.0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= rel_tol * max(hi, 1.0):
            break
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class StabilityAssessment:
    c_min: float     # L/(K*Re) at the operating point [F]
    l_max: float     # K*C*Re at the operating point [H]
    re: float        # CPL impedance magnitude at the operating point [ohm]
    stable: bool     # C > c_min
    p_crit: float | None  # predicted instability power [W], None if none found
    margin: float    # C / c_min

    def as_key_values(self) -> list[str]:
        return [
            f"re_ohm={self.re!r}",
            f"c_min_f={self.c_min!r}",
            f"l_max_h={self.l_max!r}",
            f"stable={str(self.stable).lower()}",
            f"margin={self.margin!r}",
            f"p_crit_w={'none' if self.p_crit is None else repr(self.p_crit)}",
        ]


def assess(
    params: ConverterParams,
    l: float,
    c: float,
    k: float,
    p: float,
) -> StabilityAssessment:
    """Evaluate the capacitance/inductance bounds at operating power p."""
    v = droop_voltage(params, p)
    if v <= 0.0:
        raise ValueError("droop law gives non-positive voltage at this power")
    re = equivalent_cpl_impedance(v, p)
    if math.isinf(re):
        return StabilityAssessment(c_min=0.0, l_max=math.inf, re=re, stable=True,
                                   p_crit=predict_instability_power(params, l, c, k),
                                   margin=math.inf)
    c_min = min_capacitance(l, k, re)
    l_max = max_inductance(k, c, re)
    return StabilityAssessment(
        c_min=c_min,
        l_max=l_max,
        re=re,
        stable=c > c_min,
        p_crit=predict_instability_power(params, l, c, k),
        margin=c / c_min,
    )


def detect_oscillation(
    trace: SimTrace,
    f_lo: float = 100.0,
    f_hi: float = 3000.0,
    window_s: float = 0.05,
    threshold_frac: float = 0.02,
    nominal: float | None = None,
) -> float | None:
    """Onset time of a growing oscillation in v_bus, or None.

    Each sliding window (half-window stride) is detrended by removing the
    mean of its first differences and reconstructing (equivalent to taking
    out the linear ramp), then its peak-to-peak swing is compared against
    threshold_frac of the nominal voltage.  Onset is the start of the first
    window that exceeds the threshold with a non-decaying envelope relative
    to the previous window.
    """
    if len(trace) < 8 or trace.sample_dt <= 0.0:
        return None
    fs = 1.0 / trace.sample_dt
    if fs <= 2.0 * f_hi:
        raise ValueError(
            f"trace sample rate {fs:g} Hz cannot resolve oscillations up to {f_hi:g} Hz"
        )
    if not (0.0 < f_lo < f_hi):
        raise ValueError("need 0 < f_lo < f_hi")
    if nominal is None:
        nominal = float(np.median(trace.v_bus[: max(2, min(len(trace), 50))]))
    win = max(4, int(round(window_s / trace.sample_dt)))
    stride = max(1, win // 2)
    threshold = threshold_frac * abs(nominal)

    prev_pp = None
    v = trace.v_bus
    for start in range(0, len(v) - win, stride):
        seg = v[start:start + win]
        w = np.diff(seg)
        w = w - w.mean()
        r = np.cumsum(w)
        pp = float(r.max() - r.min())
        if pp > threshold and prev_pp is not None and pp >= prev_pp:
            return float(trace.t[start])
        prev_pp = pp
    return None


def sweep_grid(
    params: ConverterParams,
    l_values,
    c_values,
    k_values,
    p: float,
) -> list[dict]:
    """Stability map over (l, c, k): p_crit and the stable flag at power p."""
    rows = []
    for l in l_values:
        for c in c_values:
            for k in k_values:
                a = assess(params, float(l), float(c), float(k), p)
                rows.append({
                    "l": float(l), "c": float(c), "k": float(k),
                    "p_crit": a.p_crit, "stable": a.stable,
                })
    return rows
