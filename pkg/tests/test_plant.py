import math

import numpy as np
import pytest

from droopsim.errors import InfeasibleOperatingPointError
from droopsim.plant import (
    DEFAULT_PARAMS,
    current_to_voltage_tf,
    duty_to_current_tf,
    solve_operating_point,
)

LOSSLESS = DEFAULT_PARAMS.with_(r_esr=0.0, r_bat=0.0)


def bisect_inductor_current(params, v_out, p_out):
    """Independent oracle: bisection on i*(e - rs*i) - p over the low root."""
    e = params.e_src
    rs = params.r_esr + params.r_bat
    if rs == 0.0:
        return p_out / e
    lo, hi = 0.0, e / (2.0 * rs)  # vertex of the downward parabola

    def g(i):
        return i * (e - rs * i) - p_out

    assert g(lo) <= 0.0 <= g(hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestParams:
    def test_defaults_are_reference_values(self):
        p = DEFAULT_PARAMS
        assert (p.v_nl, p.e_src, p.r_bat) == (350.0, 130.0, 0.03)
        assert (p.l_ind, p.r_esr, p.c_out) == (2e-3, 0.01, 3.3e-3)
        assert p.k_vp == pytest.approx(10.0 / 3600.0)
        assert (p.k_vi, p.f_i, p.f_v) == (1.0, 20e3, 200.0)
        assert (p.f_lpf, p.ramp, p.f_sw) == (200.0, 50.0, 30e3)

    def test_boost_requires_step_up(self):
        with pytest.raises(ValueError):
            DEFAULT_PARAMS.with_(e_src=400.0)

    def test_positivity(self):
        with pytest.raises(ValueError):
            DEFAULT_PARAMS.with_(l_ind=0.0)
        with pytest.raises(ValueError):
            DEFAULT_PARAMS.with_(r_bat=-0.01)
        # zero resistance and zero droop are legitimate idealizations
        DEFAULT_PARAMS.with_(r_bat=0.0, r_esr=0.0, k_vp=0.0)


class TestOperatingPoint:
    def test_no_load(self):
        op = solve_operating_point(DEFAULT_PARAMS, 350.0, 0.0)
        assert op.i_l == 0.0
        assert 1.0 - op.duty == pytest.approx(130.0 / 350.0, rel=1e-12)
        assert math.isinf(op.r_load)

    def test_lossless_power_balance(self):
        op = solve_operating_point(LOSSLESS, 350.0, 3600.0)
        assert op.i_l == pytest.approx(3600.0 / 130.0, rel=1e-12)
        assert op.duty == pytest.approx(1.0 - 130.0 / 350.0, rel=1e-12)

    def test_reference_point_against_bisection_oracle(self):
        op = solve_operating_point(DEFAULT_PARAMS, 350.0, 3600.0)
        i_oracle = bisect_inductor_current(DEFAULT_PARAMS, 350.0, 3600.0)
        assert op.i_l == pytest.approx(i_oracle, rel=1e-10)
        # both averaged steady-state equations satisfied
        e, rs = DEFAULT_PARAMS.e_src, DEFAULT_PARAMS.r_esr + DEFAULT_PARAMS.r_bat
        u = 1.0 - op.duty
        assert u * 350.0 - (e - op.i_l * rs) == pytest.approx(0.0, abs=1e-12 * 350.0)
        assert op.i_l * u - 3600.0 / 350.0 == pytest.approx(0.0, abs=1e-12 * 30.0)

    def test_residual_grid(self):
        e, rs = DEFAULT_PARAMS.e_src, DEFAULT_PARAMS.r_esr + DEFAULT_PARAMS.r_bat
        for v_out in np.linspace(200.0, 500.0, 10):
            for p_out in np.linspace(0.0, 9000.0, 10):
                op = solve_operating_point(DEFAULT_PARAMS, v_out, p_out)
                u = 1.0 - op.duty
                r1 = (u * v_out - (e - op.i_l * rs)) / v_out
                r2 = (op.i_l * u - p_out / v_out) / max(p_out / v_out, 1.0)
                assert abs(r1) < 1e-9
                assert abs(r2) < 1e-9

    def test_monotone_in_power(self):
        currents = [solve_operating_point(DEFAULT_PARAMS, 350.0, p).i_l
                    for p in np.linspace(100.0, 50e3, 25)]
        assert all(b > a for a, b in zip(currents, currents[1:]))

    def test_infeasible_power(self):
        e, rs = DEFAULT_PARAMS.e_src, DEFAULT_PARAMS.r_esr + DEFAULT_PARAMS.r_bat
        p_max = e * e / (4.0 * rs)
        with pytest.raises(InfeasibleOperatingPointError):
            solve_operating_point(DEFAULT_PARAMS, 350.0, 1.01 * p_max)

    def test_preconditions(self):
        with pytest.raises(ValueError):
            solve_operating_point(DEFAULT_PARAMS, 350.0, -1.0)
        with pytest.raises(ValueError):
            solve_operating_point(DEFAULT_PARAMS, 100.0, 0.0)


class TestDutyToCurrent:
    def test_dc_gain(self):
        op = solve_operating_point(DEFAULT_PARAMS, 350.0, 3600.0)
        g = duty_to_current_tf(DEFAULT_PARAMS, op)
        dc = g.eval_complex(0.0)
        u = 1.0 - op.duty
        assert dc.real == pytest.approx(350.0 / u, rel=1e-12)
        assert dc.imag == 0.0

    def test_rhp_zero_location(self):
        op = solve_operating_point(LOSSLESS, 350.0, 3600.0)
        g = duty_to_current_tf(LOSSLESS, op)
        roots = np.roots(g.num)
        assert len(roots) == 1
        f_z = roots[0].real / (2.0 * math.pi)
        assert roots[0].real > 0.0
        want = (1.0 - op.duty) * 350.0 / (2.0 * math.pi * 2e-3 * op.i_l)
        assert f_z == pytest.approx(want, rel=1e-9)
        assert f_z == pytest.approx(373.6, rel=2e-3)

    def test_no_load_degenerates_to_zeroless_form(self):
        op = solve_operating_point(DEFAULT_PARAMS, 350.0, 0.0)
        g = duty_to_current_tf(DEFAULT_PARAMS, op)
        assert len(g.num) == 1  # constant numerator, no zero
        assert len(g.den) == 3
        assert g.den[1] == 0.0  # L/R term vanishes at no load

    def test_coefficients_as_written(self):
        op = solve_operating_point(DEFAULT_PARAMS, 350.0, 3600.0)
        g = duty_to_current_tf(DEFAULT_PARAMS, op)
        u = 1.0 - op.duty
        l, c, r = 2e-3, 3.3e-3, 350.0 ** 2 / 3600.0
        lead = l * c
        assert g.num == pytest.approx(
            (-l * op.i_l / lead, u * 350.0 / lead), rel=1e-12)
        assert g.den == pytest.approx((1.0, (l / r) / lead, u * u / lead), rel=1e-12)


class TestCurrentToVoltage:
    def test_dc_gain(self):
        op = solve_operating_point(DEFAULT_PARAMS, 350.0, 3600.0)
        g = current_to_voltage_tf(DEFAULT_PARAMS, op)
        assert g.eval_complex(0.0).real == pytest.approx(350.0 / (2.0 * op.i_l), rel=1e-12)

    def test_no_load_is_scaled_integrator(self):
        op = solve_operating_point(DEFAULT_PARAMS, 350.0, 0.0)
        g = current_to_voltage_tf(DEFAULT_PARAMS, op)
        u = 1.0 - op.duty
        val = g.eval_complex(1j * 100.0)
        want = u / (3.3e-3 * 1j * 100.0)
        assert abs(val - want) / abs(want) < 1e-12

    def test_pole_location(self):
        op = solve_operating_point(LOSSLESS, 350.0, 3600.0)
        g = current_to_voltage_tf(LOSSLESS, op)
        pole = np.roots(g.den)[0]
        u = 1.0 - op.duty
        want = -2.0 * u * op.i_l / (350.0 * 3.3e-3)
        assert pole.real == pytest.approx(want, rel=1e-9)
        assert pole.real / (2 * math.pi) == pytest.approx(-2.835, rel=2e-3)

    def test_shares_numerator_with_current_plant(self):
        op = solve_operating_point(DEFAULT_PARAMS, 350.0, 3600.0)
        a = duty_to_current_tf(DEFAULT_PARAMS, op)
        b = current_to_voltage_tf(DEFAULT_PARAMS, op)
        ratio = a.num[0] / b.num[0]
        assert a.num == pytest.approx(tuple(ratio * x for x in b.num), rel=1e-12)
