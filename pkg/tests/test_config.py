from pathlib import Path

import pytest

from droopsim.config import parse_config, parse_config_file, serialize_config
from droopsim.errors import ConfigError
from droopsim.plant import DEFAULT_PARAMS

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

GOOD = """\
[converter]
v_nl = 350.0
e_src = 130.0
r_bat = 0.03
l_ind = 2e-3
r_esr = 0.01
c_out = 3.3e-3
k_vp = 0.002777777777777778
k_vi = 1.0
f_i = 20e3
f_v = 200.0
f_lpf = 200.0
ramp = 50.0
f_sw = 30e3

[network]
l_line = 760e-6
r_line = 1.0
c_bus = 30.8e-6

[sim]
dt = 1e-6
t_end = 2.5
p_load = 4000.0
decimation = 50

[events]
t=1.0 action=ramp_load_power target=6000.0 rate=1000.0
t=2.0 action=set_vref value=360.0
"""


class TestParse:
    def test_reference_fixture_matches_defaults(self):
        params, scenario = parse_config_file(CONFIG_DIR / "baseline.cfg")
        assert params == DEFAULT_PARAMS
        assert scenario.p_load0 == 3600.0
        assert scenario.dt == 1e-6

    def test_full_document(self):
        params, scenario = parse_config(GOOD)
        assert params.v_nl == 350.0
        assert scenario.network.l_line == 760e-6
        assert scenario.decimation == 50
        assert len(scenario.events) == 2
        assert scenario.events[0].action == "ramp_load_power"
        assert scenario.events[0].rate == 1000.0

    def test_events_optional(self):
        text = GOOD.split("[events]")[0]
        _, scenario = parse_config(text)
        assert scenario.events == ()

    def test_network_optional(self):
        text = GOOD.replace("""[network]
l_line = 760e-6
r_line = 1.0
c_bus = 30.8e-6

""", "")
        text = text.split("[events]")[0]
        _, scenario = parse_config(text)
        assert scenario.network.mode == 0


def _expect_error(text, fragment, line_no=None):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert fragment in str(err.value)
    if line_no is not None:
        assert err.value.line_no == line_no
    return err.value


class TestDiagnostics:
    def test_unknown_key_with_line_number(self):
        bad = GOOD.replace("r_bat = 0.03", "r_bat = 0.03\nflux_capacitance = 1.21")
        err = _expect_error(bad, "unknown key 'flux_capacitance'")
        assert err.line_no == 5

    def test_missing_required_key(self):
        bad = GOOD.replace("c_out = 3.3e-3\n", "")
        _expect_error(bad, "missing key(s) in [converter]: c_out")

    def test_hierarchy_violation_names_pair(self):
        bad = GOOD.replace("f_i = 20e3", "f_i = 100.0")
        err = _expect_error(bad, "f_v < f_i")
        assert err.line_no is not None

    def test_unknown_section(self):
        _expect_error("[thermal]\nq = 1\n" + GOOD, "unknown section")

    def test_duplicate_key(self):
        bad = GOOD.replace("ramp = 50.0", "ramp = 50.0\nramp = 60.0")
        _expect_error(bad, "duplicate key 'ramp'")

    def test_bad_number(self):
        bad = GOOD.replace("ramp = 50.0", "ramp = fast")
        _expect_error(bad, "not a number")

    def test_content_before_section(self):
        _expect_error("dt = 1e-6\n" + GOOD, "content before any section", 1)

    def test_malformed_header(self):
        _expect_error("[converter\nv_nl = 350\n", "malformed section header", 1)

    def test_unknown_event_action(self):
        bad = GOOD.replace("action=set_vref value=360.0", "action=warp value=9.0")
        _expect_error(bad, "unknown event action 'warp'")

    def test_event_missing_field(self):
        bad = GOOD.replace("action=ramp_load_power target=6000.0 rate=1000.0",
                           "action=ramp_load_power target=6000.0")
        _expect_error(bad, "needs field 'rate'")

    def test_event_unknown_field(self):
        bad = GOOD.replace("action=set_vref value=360.0",
                           "action=set_vref value=360.0 speed=3")
        _expect_error(bad, "unknown field(s)")

    def test_event_bad_droop_mode(self):
        bad = GOOD.replace("t=2.0 action=set_vref value=360.0",
                           "t=2.0 action=set_droop mode=zz coefficient=0.1")
        _expect_error(bad, "droop mode")

    def test_dt_undersampling_flagged(self):
        bad = GOOD.replace("dt = 1e-6", "dt = 1e-3")
        _expect_error(bad, "undersamples")

    def test_unsorted_events(self):
        bad = GOOD.replace("t=1.0 action=ramp_load_power", "t=2.5 action=ramp_load_power")
        _expect_error(bad, "sorted")

    def test_empty_document(self):
        _expect_error("", "missing required section [converter]")


class TestRoundTrip:
    def test_parse_serialize_parse_identity(self):
        params1, scenario1 = parse_config(GOOD)
        text = serialize_config(params1, scenario1)
        params2, scenario2 = parse_config(text)
        assert params1 == params2
        assert scenario1 == scenario2

    def test_serialization_is_deterministic(self):
        params, scenario = parse_config(GOOD)
        assert serialize_config(params, scenario) == serialize_config(params, scenario)

    def test_shipped_fixtures_round_trip(self):
        for cfg in sorted(CONFIG_DIR.glob("*.cfg")):
            params1, scenario1 = parse_config_file(cfg)
            params2, scenario2 = parse_config(serialize_config(params1, scenario1))
            assert params1 == params2, cfg.name
            assert scenario1 == scenario2, cfg.name
