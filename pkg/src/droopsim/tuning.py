"""PI synthesis for the current and voltage loops, and the hierarchy audit.

Loop shaping works on the small-signal plants from :mod:`droopsim.plant`:
the current loop gain is plant * PI, the voltage loop gain additionally
includes the closed inner loop.  Simulation gains are synthesized
separately (see :func:`simulation_gains`) because the published bandwidth
figures follow the 1/tau convention rather than the Bode-crossover one.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

from .errors import NoCrossoverError, UntunableError
from .plant import ConverterParams
from .tf import TWO_PI, LoopMargins, TransferFunction, margins, series


@dataclass(frozen=True)
class PiGains:
    kp: float
    ki: float

    def __post_init__(self):
        if self.kp <= 0.0:
            raise ValueError(f"kp must be positive, got {self.kp!r}")
        if self.ki < 0.0:
            raise ValueError(f"ki must be non-negative, got {self.ki!r}")


def pi_tf(g: PiGains) -> TransferFunction:
    """PI controller (kp*s + ki)/s."""
    return TransferFunction([g.kp, g.ki], [1.0, 0.0])


@dataclass(frozen=True)
class TuneReport:
    gains: PiGains
    achieved: LoopMargins
    target_f: float
    target_pm: float
    exact: bool

    def as_key_values(self, prefix: str = "") -> list[str]:
        m = self.achieved
        return [
            f"{prefix}kp={self.gains.kp!r}",
            f"{prefix}ki={self.gains.ki!r}",
            f"{prefix}target_f_hz={self.target_f!r}",
            f"{prefix}target_pm_deg={self.target_pm!r}",
            f"{prefix}exact={str(self.exact).lower()}",
            f"{prefix}crossover_hz={m.crossover_hz!r}",
            f"{prefix}phase_margin_deg={m.phase_margin_deg!r}",
            f"{prefix}gain_margin_db={m.gain_margin_db!r}",
        ]


def tune_pi(plant: TransferFunction, f_c: float, pm_target: float) -> TuneReport:
    """Pick PI gains so the loop gain crosses unity at f_c.

    The crossover conditions |PI*plant| = 1 and arg(PI*plant) = pm - 180 deg
    at s = j*2*pi*f_c amount to one complex equation that is linear in
    (kp, ki), so it is solved in closed form.  When that solution needs
    ki < 0 (or kp <= 0) the phase target is unreachable with a PI and the
    documented fallback applies: PI zero one decade below f_c and kp scaled
    for unity magnitude, with exact=False and the achieved margins reported.
    """
    if f_c <= 0.0:
        raise ValueError("target crossover must be positive")
    if not (0.0 < pm_target < 180.0):
        raise ValueError("phase-margin target must lie in (0, 180) degrees")

    w_c = TWO_PI * f_c
    p_val = plant.eval_complex(1j * w_c)
    if p_val == 0.0 or not (abs(p_val) > 0.0):
        raise UntunableError(f"plant magnitude is zero at f_c = {f_c:g} Hz")

    # Required controller value: unity magnitude at the target phase.
    want = cmath.exp(1j * math.radians(pm_target - 180.0)) / p_val
    kp_exact = want.real
    ki_exact = -w_c * want.imag
    ki_tol = 1e-9 * w_c * abs(kp_exact)  # rounding noise in the phase algebra

    if kp_exact > 0.0 and ki_exact >= -ki_tol:
        gains = PiGains(kp=kp_exact, ki=max(ki_exact, 0.0))
        exact = True
    else:
        # Decade-below-crossover zero, magnitude-matched.
        mag_pi_unit = abs(1.0 - 0.1j)  # |1 + (w_c/10)/(j w_c)|
        gains = PiGains(kp=1.0 / (abs(p_val) * mag_pi_unit), ki=0.0)
        gains = PiGains(kp=gains.kp, ki=gains.kp * w_c / 10.0)
        exact = False

    loop = series(plant, pi_tf(gains))
    try:
        achieved = margins(loop, f_c / 1e3, f_c * 1e2)
    except NoCrossoverError as err:
        raise UntunableError(f"tuned loop has no unity crossing near {f_c:g} Hz") from err
    return TuneReport(gains=gains, achieved=achieved, target_f=f_c,
                      target_pm=pm_target, exact=exact)


def current_loop_gain(plant_tf: TransferFunction, gc: PiGains) -> TransferFunction:
    """Open current-loop gain: duty-to-current plant in series with its PI."""
    return series(plant_tf, pi_tf(gc))


def voltage_loop_gain(
    gvi: TransferFunction, gv: PiGains, tci: TransferFunction
) -> TransferFunction:
    """Open voltage-loop gain: current-to-voltage plant * PI * closed inner loop."""
    return series(series(gvi, pi_tf(gv)), tci)


@dataclass(frozen=True)
class HierarchyCheck:
    name: str
    lhs: float
    rhs: float
    strict: bool
    ok: bool


@dataclass(frozen=True)
class HierarchyAudit:
    checks: tuple[HierarchyCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.checks)

    def failures(self) -> list[HierarchyCheck]:
        return [c for c in self.checks if not c.ok]


def check_hierarchy(params: ConverterParams) -> HierarchyAudit:
    """Audit the control-bandwidth ordering f_lpf <= f_v < f_i < f_sw."""
    checks = (
        HierarchyCheck("f_lpf <= f_v", params.f_lpf, params.f_v, False,
                       params.f_lpf <= params.f_v),
        HierarchyCheck("f_v < f_i", params.f_v, params.f_i, True,
                       params.f_v < params.f_i),
        HierarchyCheck("f_i < f_sw", params.f_i, params.f_sw, True,
                       params.f_i < params.f_sw),
    )
    return HierarchyAudit(checks=checks)


def simulation_gains(params: ConverterParams) -> tuple[PiGains, PiGains]:
    """Loop gains used by the time-domain model.

    The published bandwidths are step-response figures in the 1/tau
    convention, so the current loop is designed for a closed-loop time
    constant of 1/f_i: against the averaged current dynamics
    di/dt ~ (v_out * d)/L the proportional gain L*f_i/v_nl places the
    closed-loop pole at f_i rad-equivalent (tau = 1/f_i).  The voltage loop
    is a conventional crossover design at 2*pi*f_v on the ~(1-D)/(C*s)
    plant, fast enough to track the droop filter without adding visible
    lag.  Both PI zeros sit one decade below their loop's closed-loop pole.
    """
    kp_i = params.l_ind * params.f_i / params.v_nl
    ki_i = kp_i * params.f_i / 10.0
    w_cv = TWO_PI * params.f_v
    kp_v = params.c_out * w_cv * params.v_nl / params.e_src
    ki_v = kp_v * w_cv / 10.0
    return PiGains(kp=kp_i, ki=ki_i), PiGains(kp=kp_v, ki=ki_v)
