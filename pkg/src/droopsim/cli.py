"""Command-line front end.

Subcommands: bode, tune, simulate, characterize, stability, sweep.  Data
always goes to files (CSV, optional rendered figure); key=value reports go
to stdout; diagnostics go to stderr.  Exit codes: 0 success, 1 domain
error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from . import ident, plots, stability
from .config import parse_config_file
from .errors import DomainError
from .plant import solve_operating_point, duty_to_current_tf, current_to_voltage_tf
from .sim import run_scenario
from .tf import bode_sweep, close_unity_feedback, series, write_bode_csv
from .tuning import pi_tf, tune_pi


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="droopsim",
        description="Droop-controlled converter modeling: loop design, "
                    "simulation, characterization and CPL stability.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bode", help="frequency sweep of an assembled loop gain")
    b.add_argument("config")
    b.add_argument("--loop", choices=("current", "voltage"), default="current")
    b.add_argument("--out", required=True, help="CSV output path")
    b.add_argument("--plot", help="also render the sweep to this image file")
    b.add_argument("--power", type=float, default=3600.0,
                   help="operating power for the small-signal plants [W]")
    b.add_argument("--f-lo", type=float, default=None)
    b.add_argument("--f-hi", type=float, default=None)
    b.add_argument("--points-per-decade", type=int, default=200)

    t = sub.add_parser("tune", help="PI synthesis report for both loops")
    t.add_argument("config")
    t.add_argument("--power", type=float, default=3600.0)
    t.add_argument("--loop", choices=("current", "voltage"), default="current",
                   help="which assembled loop gain --out/--plot refer to")
    t.add_argument("--out", help="optional Bode CSV of the assembled loop gain")
    t.add_argument("--plot", help="optional rendered Bode figure")

    s = sub.add_parser("simulate", help="run a scenario and export its trace")
    s.add_argument("config")
    s.add_argument("--out", required=True, help="trace CSV output path")
    s.add_argument("--plot", help="also render the trace to this image file")

    c = sub.add_parser("characterize",
                       help="step/droop/ramp identification of the model or a measured CSV")
    c.add_argument("config", nargs="?")
    c.add_argument("--measured", help="measured trace CSV (columns: t plus signals)")
    c.add_argument("--step-time", type=float, help="step instant in the measured trace [s]")
    c.add_argument("--settle-window", type=float,
                   help="fit window after the step [s] (default: to end of trace)")
    c.add_argument("--signal", help="signal column in the measured CSV")
    c.add_argument("--out", help="fitted-curve overlay CSV")
    c.add_argument("--plot", help="rendered fit figure")

    st = sub.add_parser("stability", help="CPL stability assessment")
    st.add_argument("config")
    st.add_argument("--l", type=float, help="line inductance [H] (default: [network])")
    st.add_argument("--c", type=float, help="bus capacitance [F] (default: [network])")
    st.add_argument("--k", type=float, help="droop resistance [ohm] (default: k_vi)")
    st.add_argument("--power", type=float, default=3600.0)

    sw = sub.add_parser("sweep", help="stability map over l, c, k grids")
    sw.add_argument("config")
    sw.add_argument("--grid", required=True,
                    help="semicolon-separated lists, e.g. 'l=7.6e-4;c=1e-5,3e-5;k=1,2'")
    sw.add_argument("--out", required=True, help="CSV output path")
    sw.add_argument("--power", type=float, default=3600.0)
    sw.add_argument("--plot", help="rendered sweep figure")
    return p


def _loop_gains(params, power: float):
    op = solve_operating_point(params, params.v_nl, power)
    gid = duty_to_current_tf(params, op)
    gvi = current_to_voltage_tf(params, op)
    rep_i = tune_pi(gid, params.f_i, 90.0)
    tc = series(gid, pi_tf(rep_i.gains))
    tci = close_unity_feedback(tc)
    rep_v = tune_pi(series(gvi, tci), params.f_v, 90.0)
    tv = series(series(gvi, pi_tf(rep_v.gains)), tci)
    return rep_i, tc, rep_v, tv


def _cmd_bode(args) -> int:
    params, _ = parse_config_file(args.config)
    rep_i, tc, rep_v, tv = _loop_gains(params, args.power)
    loop_tf, f_c = (tc, params.f_i) if args.loop == "current" else (tv, params.f_v)
    f_lo = args.f_lo if args.f_lo is not None else f_c / 1e3
    f_hi = args.f_hi if args.f_hi is not None else f_c * 1e2
    points = bode_sweep(loop_tf, f_lo, f_hi, args.points_per_decade)
    write_bode_csv(points, args.out)
    if args.plot:
        plots.save_bode_figure(points, args.plot, title=f"{args.loop} loop gain")
    return 0


def _cmd_tune(args) -> int:
    params, _ = parse_config_file(args.config)
    rep_i, tc, rep_v, tv = _loop_gains(params, args.power)
    for line in rep_i.as_key_values("current_"):
        print(line)
    for line in rep_v.as_key_values("voltage_"):
        print(line)
    if args.out or args.plot:
        loop_tf, f_c = (tc, params.f_i) if args.loop == "current" else (tv, params.f_v)
        points = bode_sweep(loop_tf, f_c / 1e3, f_c * 1e2)
        if args.out:
            write_bode_csv(points, args.out)
        if args.plot:
            plots.save_bode_figure(points, args.plot, title=f"{args.loop} loop gain")
    return 0


def _cmd_simulate(args) -> int:
    _, scenario = parse_config_file(args.config)
    trace = run_scenario(scenario)
    trace.to_csv(args.out)
    for t_ann, label in trace.annotations:
        print(f"annotation t={t_ann!r} {label}", file=sys.stderr)
    if args.plot:
        plots.save_trace_figure(trace, args.plot)
    return 0


def _write_overlay(path, t, y, fit) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "signal", "fit"])
        for tt, yy in zip(t, y):
            if tt < fit.t_step:
                model = fit.y0
            else:
                model = fit.y_inf + (fit.y0 - fit.y_inf) * np.exp(-(tt - fit.t_step) / fit.tau)
            w.writerow([repr(float(tt)), repr(float(yy)), repr(float(model))])


def _cmd_characterize(args) -> int:
    if args.measured:
        if args.step_time is None:
            raise DomainError("--measured requires --step-time")
        data = np.genfromtxt(args.measured, delimiter=",", names=True)
        names = list(data.dtype.names)
        if "t" not in names:
            raise DomainError("measured CSV needs a 't' column")
        signal = args.signal or next(n for n in names if n != "t")
        if signal not in names:
            raise DomainError(f"no column {signal!r} in {args.measured}")
        t = np.atleast_1d(data["t"])
        y = np.atleast_1d(data[signal])
        window = args.settle_window or float(t[-1] - args.step_time)
        fit = ident.fit_time_constant(t, y, args.step_time, window)
        print(f"signal={signal}")
        print(f"tau_s={fit.tau!r}")
        print(f"bw_hz={fit.bw_inv_tau!r}")
        print(f"bw_standard_hz={fit.bw_standard!r}")
        print(f"y0={fit.y0!r}")
        print(f"y_inf={fit.y_inf!r}")
        print(f"rms_residual={fit.rms_residual!r}")
        if args.out:
            _write_overlay(args.out, t, y, fit)
        if args.plot:
            plots.save_step_fit_figure(t, y, fit, args.plot, title=f"{signal} step fit")
        return 0

    if not args.config:
        raise DomainError("characterize needs a config file or --measured CSV")
    params, _ = parse_config_file(args.config)
    report = ident.characterize_model(params)
    for line in report.as_key_values():
        print(line)
    if args.out or args.plot:
        from .sim import run_current_step

        tr = run_current_step(params, p_load=5.0 * params.e_src,
                              i_step=5.0, t_step=5e-4, t_end=3e-3)
        fit = report.current_loop
        if args.out:
            _write_overlay(args.out, tr.t, tr.i_l, fit)
        if args.plot:
            plots.save_step_fit_figure(tr.t, tr.i_l, fit, args.plot,
                                       title="current loop step fit")
    return 0


def _cmd_stability(args) -> int:
    params, scenario = parse_config_file(args.config)
    l = args.l if args.l is not None else scenario.network.l_line
    c = args.c if args.c is not None else scenario.network.c_bus
    k = args.k if args.k is not None else params.k_vi
    if l <= 0.0 or c <= 0.0:
        raise DomainError(
            "line inductance and bus capacitance must be positive; set them in "
            "[network] or pass --l/--c")
    a = stability.assess(params, l, c, k, args.power)
    for line in a.as_key_values():
        print(line)
    return 0


def _parse_grid(spec: str) -> dict[str, list[float]]:
    grids: dict[str, list[float]] = {}
    for part in spec.split(";"):
        part = part.strip()
        if not part:
            continue
        key, _, raw = part.partition("=")
        key = key.strip().lower()
        if key not in ("l", "c", "k"):
            raise DomainError(f"grid variable must be l, c or k, got {key!r}")
        try:
            values = [float(x) for x in raw.split(",") if x.strip()]
        except ValueError:
            raise DomainError(f"bad grid values for {key!r}: {raw!r}") from None
        if not values:
            raise DomainError(f"empty grid for {key!r}")
        grids[key] = values
    for key in ("l", "c", "k"):
        if key not in grids:
            raise DomainError(f"grid spec must include {key}=...")
    return grids


def _cmd_sweep(args) -> int:
    params, _ = parse_config_file(args.config)
    grids = _parse_grid(args.grid)
    rows = stability.sweep_grid(params, grids["l"], grids["c"], grids["k"], args.power)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["l", "c", "k", "p_crit", "stable"])
        for r in rows:
            p_crit = "" if r["p_crit"] is None else repr(r["p_crit"])
            w.writerow([repr(r["l"]), repr(r["c"]), repr(r["k"]),
                        p_crit, str(r["stable"]).lower()])
    if args.plot:
        plots.save_sweep_figure(rows, args.plot)
    return 0


_HANDLERS = {
    "bode": _cmd_bode,
    "tune": _cmd_tune,
    "simulate": _cmd_simulate,
    "characterize": _cmd_characterize,
    "stability": _cmd_stability,
    "sweep": _cmd_sweep,
}


def dispatch(argv) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
