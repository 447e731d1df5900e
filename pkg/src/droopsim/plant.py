"""Converter parameters, steady-state operating point, small-signal plants.

The converter is an averaged boost stage: source e_src behind r_bat, boost
inductor l_ind with ESR r_esr, output capacitor c_out, regulating a nominal
v_nl bus.  Control bandwidths (f_i, f_v, f_lpf), the droop coefficients and
the reference ramp rate ride along so one object describes the whole model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import InfeasibleOperatingPointError
from .tf import TransferFunction


@dataclass(frozen=True)
class ConverterParams:
    v_nl: float      # no-load voltage reference [V]
    e_src: float     # source voltage [V]
    r_bat: float     # source resistance [ohm]
    l_ind: float     # boost inductance [H]
    r_esr: float     # inductor ESR [ohm]
    c_out: float     # output capacitance [F]
    k_vp: float      # power-droop coefficient [V/W]
    k_vi: float      # equivalent current-droop resistance [ohm]
    f_i: float       # current-loop bandwidth [Hz]
    f_v: float       # voltage-loop bandwidth [Hz]
    f_lpf: float     # droop low-pass bandwidth [Hz]
    ramp: float      # voltage reference ramp rate [V/s]
    f_sw: float      # switching frequency [Hz]

    def __post_init__(self):
        # resistances and droop coefficients may legitimately be zero
        # (ideal source, no droop); everything else must be positive
        for name in ("v_nl", "e_src", "l_ind", "c_out",
                     "f_i", "f_v", "f_lpf", "ramp", "f_sw"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        for name in ("r_bat", "r_esr", "k_vp", "k_vi"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)!r}")
        if self.e_src >= self.v_nl:
            raise ValueError(
                f"boost operation requires e_src < v_nl ({self.e_src!r} >= {self.v_nl!r})"
            )
        # The bandwidth ordering f_lpf <= f_v < f_i < f_sw is audited by
        # tuning.check_hierarchy and enforced where documents enter the
        # system (config parsing), so deliberately mis-ordered parameter
        # sets remain constructible for audits.

    def with_(self, **kw) -> "ConverterParams":
        return replace(self, **kw)


#: Reference parameter set used throughout the verification scenarios.
DEFAULT_PARAMS = ConverterParams(
    v_nl=350.0,
    e_src=130.0,
    r_bat=0.03,
    l_ind=2e-3,
    r_esr=0.01,
    c_out=3.3e-3,
    k_vp=10.0 / 3600.0,
    k_vi=1.0,
    f_i=20e3,
    f_v=200.0,
    f_lpf=200.0,
    ramp=50.0,
    f_sw=30e3,
)


@dataclass(frozen=True)
class OperatingPoint:
    duty: float      # steady-state duty cycle
    i_l: float       # inductor current [A]
    v_out: float     # output voltage [V]
    p_out: float     # output power [W]
    r_load: float    # v_out^2 / p_out [ohm], inf at no load


def solve_operating_point(params: ConverterParams, v_out: float, p_out: float) -> OperatingPoint:
    """Averaged steady state of the boost stage at a given load point.

    Solves the pair
        (1 - D) * v_out = e_src - i_l * (r_esr + r_bat)
        i_l * (1 - D)   = p_out / v_out
    which reduces to the scalar quadratic rs*i^2 - e*i + p = 0.  Newton
    iteration from i = p/e converges onto the low-current (physical) root;
    the high-current root is rejected.
    """
    if p_out < 0.0:
        raise ValueError("p_out must be non-negative")
    if v_out <= params.e_src:
        raise ValueError("boost output must exceed the source voltage")

    e = params.e_src
    rs = params.r_esr + params.r_bat
    if e * e - 4.0 * rs * p_out < 0.0:
        raise InfeasibleOperatingPointError(
            f"p_out = {p_out:g} W exceeds source capability {e * e / (4 * rs):g} W"
        )

    if p_out == 0.0:
        i_l = 0.0
    else:
        i_l = p_out / e
        scale = max(p_out, 1.0)
        for _ in range(60):
            g = i_l * (e - rs * i_l) - p_out
            if abs(g) <= 1e-12 * scale:
                break
            dg = e - 2.0 * rs * i_l
            i_l -= g / dg

    u = (e - rs * i_l) / v_out  # 1 - D
    duty = 1.0 - u
    if not (0.0 <= duty < 1.0):
        raise InfeasibleOperatingPointError(
            f"steady-state duty {duty:g} outside [0, 1) at v={v_out:g} V, p={p_out:g} W"
        )
    r_load = math.inf if p_out == 0.0 else v_out * v_out / p_out
    return OperatingPoint(duty=duty, i_l=i_l, v_out=v_out, p_out=p_out, r_load=r_load)


def duty_to_current_tf(params: ConverterParams, op: OperatingPoint) -> TransferFunction:
    """Small-signal duty-to-inductor-current plant at an operating point.

        ((1-D)*Vo - s*L*IL) / (L*C*s^2 + (L/R)*s + (1-D)^2)

    R is the effective load resistance at the operating point; the L/R term
    vanishes in the no-load limit.  The numerator carries the right-half-
    plane zero at (1-D)*Vo / (L*IL) whenever IL > 0.
    """
    if op.r_load == 0.0:
        raise ValueError("zero load resistance (infinite power) is not representable")
    u = 1.0 - op.duty
    l, c = params.l_ind, params.c_out
    l_over_r = 0.0 if math.isinf(op.r_load) else l / op.r_load
    return TransferFunction(
        [-l * op.i_l, u * op.v_out],
        [l * c, l_over_r, u * u],
    )


def current_to_voltage_tf(params: ConverterParams, op: OperatingPoint) -> TransferFunction:
    """Small-signal inductor-current-to-output-voltage plant.

        ((1-D)*Vo - s*L*IL) / (Vo*C*s + 2*(1-D)*IL)

    Shares its numerator (and the RHP zero) with duty_to_current_tf; at no
    load it degenerates to the pure integrator (1-D)/(C*s).
    """
    u = 1.0 - op.duty
    return TransferFunction(
        [-params.l_ind * op.i_l, u * op.v_out],
        [op.v_out * params.c_out, 2.0 * u * op.i_l],
    )
