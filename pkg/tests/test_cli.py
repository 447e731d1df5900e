import csv
import math
from pathlib import Path

import numpy as np
import pytest

from droopsim.cli import dispatch

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"
BASELINE = str(CONFIG_DIR / "baseline.cfg")
DROOP10 = str(CONFIG_DIR / "droop_10v.cfg")
CPL = str(CONFIG_DIR / "cpl_ramp.cfg")


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestSimulate:
    def test_happy_path_writes_fixed_columns(self, tmp_path, capsys):
        out = tmp_path / "trace.csv"
        rc = dispatch(["simulate", DROOP10, "--out", str(out)])
        assert rc == 0
        rows = read_rows(out)
        assert rows[0] == ["t", "v_bus", "v_c", "i_l", "i_line", "p_load",
                           "duty", "v_ref_eff"]
        assert all(len(r) == 8 for r in rows[1:])
        # data stream stays clean: every cell parses as a float
        for r in rows[1:]:
            for cell in r:
                float(cell)
        v_final = float(rows[-1][1])
        assert abs(v_final - 340.0) < 0.5
        assert capsys.readouterr().out == ""

    def test_deterministic_output(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert dispatch(["simulate", DROOP10, "--out", str(a)]) == 0
        assert dispatch(["simulate", DROOP10, "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_plot_written(self, tmp_path):
        out = tmp_path / "t.csv"
        png = tmp_path / "t.png"
        rc = dispatch(["simulate", DROOP10, "--out", str(out), "--plot", str(png)])
        assert rc == 0
        assert png.stat().st_size > 1000

    def test_missing_config_is_domain_error(self, tmp_path, capsys):
        rc = dispatch(["simulate", str(tmp_path / "nope.cfg"),
                       "--out", str(tmp_path / "o.csv")])
        assert rc == 1
        assert "error:" in capsys.readouterr().err

    def test_bad_config_reports_line(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text(Path(BASELINE).read_text().replace("f_i = 20e3", "f_i = 100.0"))
        rc = dispatch(["simulate", str(cfg), "--out", str(tmp_path / "o.csv")])
        assert rc == 1
        err = capsys.readouterr().err
        assert "line" in err and "f_v < f_i" in err


class TestBode:
    def test_csv_header_and_order(self, tmp_path):
        out = tmp_path / "bode.csv"
        rc = dispatch(["bode", BASELINE, "--loop", "current", "--out", str(out)])
        assert rc == 0
        rows = read_rows(out)
        assert rows[0] == ["f_hz", "mag_db", "phase_deg"]
        freqs = [float(r[0]) for r in rows[1:]]
        assert freqs == sorted(freqs)

    def test_voltage_loop_and_plot(self, tmp_path):
        out = tmp_path / "tv.csv"
        png = tmp_path / "tv.png"
        rc = dispatch(["bode", BASELINE, "--loop", "voltage", "--out", str(out),
                       "--plot", str(png)])
        assert rc == 0
        assert png.exists()
        # magnitude passes through 0 dB near 200 Hz
        rows = read_rows(out)[1:]
        f = np.array([float(r[0]) for r in rows])
        m = np.array([float(r[1]) for r in rows])
        k = int(np.argmin(np.abs(m)))
        assert f[k] == pytest.approx(200.0, rel=0.05)


class TestTune:
    def test_report_lines(self, capsys):
        rc = dispatch(["tune", BASELINE])
        assert rc == 0
        out = capsys.readouterr().out
        assert "current_kp=" in out and "voltage_kp=" in out
        vals = dict(line.split("=", 1) for line in out.strip().splitlines())
        assert float(vals["current_crossover_hz"]) == pytest.approx(20e3, rel=0.01)
        assert float(vals["voltage_crossover_hz"]) == pytest.approx(200.0, rel=0.01)
        assert float(vals["current_phase_margin_deg"]) > 0.0
        assert float(vals["voltage_phase_margin_deg"]) > 0.0


class TestStability:
    def test_reference_network_prediction(self, capsys):
        rc = dispatch(["stability", CPL, "--power", "4600"])
        assert rc == 0
        out = capsys.readouterr().out
        vals = dict(line.split("=", 1) for line in out.strip().splitlines())
        assert float(vals["p_crit_w"]) == pytest.approx(4600.0, rel=0.05)
        assert float(vals["re_ohm"]) == pytest.approx(24.7, abs=0.1)

    def test_requires_network_values(self, capsys):
        rc = dispatch(["stability", BASELINE])
        assert rc == 1
        assert "must be positive" in capsys.readouterr().err


class TestSweep:
    def test_grid_csv(self, tmp_path):
        out = tmp_path / "sweep.csv"
        rc = dispatch(["sweep", BASELINE, "--grid",
                       "l=760e-6;c=15.4e-6,30.8e-6,61.6e-6;k=1.0",
                       "--out", str(out), "--power", "3600"])
        assert rc == 0
        rows = read_rows(out)
        assert rows[0] == ["l", "c", "k", "p_crit", "stable"]
        assert len(rows) == 4
        assert rows[1][4] == "false"
        assert rows[2][4] == "true"

    def test_bad_grid(self, capsys):
        rc = dispatch(["sweep", BASELINE, "--grid", "l=1e-4;c=1e-5", "--out", "x.csv"])
        assert rc == 1
        assert "grid" in capsys.readouterr().err


class TestCharacterize:
    def test_measured_csv(self, tmp_path, capsys):
        tau = 2e-3
        t = np.arange(0.0, 0.05, 1e-4)
        y = np.where(t < 0.01, 1.0, 6.0 - 5.0 * np.exp(-(t - 0.01) / tau))
        meas = tmp_path / "meas.csv"
        with open(meas, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "i_out"])
            for tt, yy in zip(t, y):
                w.writerow([repr(float(tt)), repr(float(yy))])
        overlay = tmp_path / "fit.csv"
        png = tmp_path / "fit.png"
        rc = dispatch(["characterize", "--measured", str(meas),
                       "--step-time", "0.01", "--out", str(overlay),
                       "--plot", str(png)])
        assert rc == 0
        vals = dict(line.split("=", 1)
                    for line in capsys.readouterr().out.strip().splitlines())
        assert vals["signal"] == "i_out"
        assert float(vals["tau_s"]) == pytest.approx(tau, rel=0.02)
        assert math.isclose(float(vals["bw_hz"]) * float(vals["tau_s"]), 1.0,
                            rel_tol=1e-9)
        rows = read_rows(overlay)
        assert rows[0] == ["t", "signal", "fit"]
        assert png.exists()

    def test_measured_requires_step_time(self, capsys):
        rc = dispatch(["characterize", "--measured", "whatever.csv"])
        assert rc == 1
        assert "--step-time" in capsys.readouterr().err

    def test_measured_signal_selection(self, tmp_path, capsys):
        t = np.arange(0.0, 0.2, 1e-3)
        flat = np.full_like(t, 3.0)
        stepped = np.where(t < 0.05, 10.0, 20.0 - 10.0 * np.exp(-(t - 0.05) / 0.01))
        meas = tmp_path / "two_sig.csv"
        with open(meas, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "aux", "v_out"])
            for row in zip(t, flat, stepped):
                w.writerow([repr(float(x)) for x in row])
        rc = dispatch(["characterize", "--measured", str(meas),
                       "--step-time", "0.05", "--signal", "v_out",
                       "--settle-window", "0.1"])
        assert rc == 0
        vals = dict(line.split("=", 1)
                    for line in capsys.readouterr().out.strip().splitlines())
        assert vals["signal"] == "v_out"
        assert float(vals["tau_s"]) == pytest.approx(0.01, rel=0.02)

    def test_model_characterization_report(self, capsys):
        rc = dispatch(["characterize", BASELINE])
        assert rc == 0
        vals = dict(line.split("=", 1)
                    for line in capsys.readouterr().out.strip().splitlines())
        assert 16e3 <= float(vals["current_loop_bw_hz"]) <= 24e3
        assert float(vals["droop_lpf_bw_hz"]) == pytest.approx(200.0, rel=0.1)
        assert float(vals["ramp_rate_v_per_s"]) == pytest.approx(50.0, abs=0.5)


class TestUsageErrors:
    def test_unknown_subcommand_exits_2(self):
        with pytest.raises(SystemExit) as err:
            dispatch(["transmogrify"])
        assert err.value.code == 2

    def test_missing_required_argument_exits_2(self):
        with pytest.raises(SystemExit) as err:
            dispatch(["simulate"])
        assert err.value.code == 2

    def test_no_arguments_exits_2(self):
        with pytest.raises(SystemExit) as err:
            dispatch([])
        assert err.value.code == 2
