"""Flat key=value scenario files: parsing, validation, serialization.

Format: INI-like sections ``[converter]``, ``[network]``, ``[sim]`` holding
``key = value`` lines, plus an ``[events]`` section whose lines read
``t=<s> action=<name> field=value ...``.  Unknown sections or keys are
errors (fail closed) and every diagnostic carries its line number.  Blank
lines and full-line ``#`` comments are ignored.
"""

from __future__ import annotations

from .errors import ConfigError
from .plant import ConverterParams
from .sim import Event, NetworkSpec, Scenario
from .tuning import check_hierarchy

_CONVERTER_KEYS = ("v_nl", "e_src", "r_bat", "l_ind", "r_esr", "c_out",
                   "k_vp", "k_vi", "f_i", "f_v", "f_lpf", "ramp", "f_sw")
_NETWORK_KEYS = ("l_line", "r_line", "c_bus")
_SIM_KEYS = ("dt", "t_end", "p_load", "decimation", "i_max", "v_min")
_SIM_REQUIRED = ("dt", "t_end")
_SECTIONS = ("converter", "network", "sim", "events")

_EVENT_FIELDS = {
    "set_load_power": {"power": float},
    "ramp_load_power": {"target": float, "rate": float},
    "set_droop": {"mode": str, "coefficient": float},
    "set_vref": {"value": float},
    "enable_droop": {},
    "disable_droop": {},
}


def _parse_float(raw: str, key: str, line_no: int) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"value for {key!r} is not a number: {raw!r}", line_no) from None


def _rebuild(exc: ValueError, key_lines: dict[str, int], fallback: int | None) -> ConfigError:
    """Attach the best-matching key's line number to a validation error."""
    msg = str(exc)
    for key, line_no in key_lines.items():
        if key in msg:
            return ConfigError(msg, line_no)
    return ConfigError(msg, fallback)


def parse_config(text: str) -> tuple[ConverterParams, Scenario]:
    """Parse and fully validate a scenario document."""
    section = None
    values: dict[str, dict[str, float]] = {"converter": {}, "network": {}, "sim": {}}
    key_lines: dict[str, int] = {}
    section_lines: dict[str, int] = {}
    events: list[Event] = []
    event_lines: list[int] = []

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith(";"):
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {line!r}", line_no)
            name = line[1:-1].strip().lower()
            if name not in _SECTIONS:
                raise ConfigError(f"unknown section [{name}]", line_no)
            if name in section_lines:
                raise ConfigError(f"duplicate section [{name}]", line_no)
            section_lines[name] = line_no
            section = name
            continue
        if section is None:
            raise ConfigError(f"content before any section: {line!r}", line_no)

        if section == "events":
            events.append(_parse_event(line, line_no))
            event_lines.append(line_no)
            continue

        if "=" not in line:
            raise ConfigError(f"expected key = value, got {line!r}", line_no)
        key, _, raw_val = line.partition("=")
        key, raw_val = key.strip(), raw_val.strip()
        allowed = {"converter": _CONVERTER_KEYS, "network": _NETWORK_KEYS,
                   "sim": _SIM_KEYS}[section]
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in [{section}]", line_no)
        if key in values[section]:
            raise ConfigError(f"duplicate key {key!r} in [{section}]", line_no)
        values[section][key] = _parse_float(raw_val, key, line_no)
        key_lines[key] = line_no

    if "converter" not in section_lines:
        raise ConfigError("missing required section [converter]")
    missing = [k for k in _CONVERTER_KEYS if k not in values["converter"]]
    if missing:
        raise ConfigError(f"missing key(s) in [converter]: {', '.join(missing)}",
                          section_lines["converter"])
    if "sim" not in section_lines:
        raise ConfigError("missing required section [sim]")
    missing = [k for k in _SIM_REQUIRED if k not in values["sim"]]
    if missing:
        raise ConfigError(f"missing key(s) in [sim]: {', '.join(missing)}",
                          section_lines["sim"])

    try:
        params = ConverterParams(**values["converter"])
    except ValueError as exc:
        raise _rebuild(exc, key_lines, section_lines["converter"]) from None

    audit = check_hierarchy(params)
    if not audit.passed:
        bad = audit.failures()[0]
        first_key = bad.name.split()[0]
        raise ConfigError(
            f"bandwidth hierarchy violated: {bad.name} fails "
            f"({bad.lhs:g} vs {bad.rhs:g})",
            key_lines.get(first_key, section_lines["converter"]),
        )

    try:
        network = NetworkSpec(**values["network"])
    except ValueError as exc:
        raise _rebuild(exc, key_lines, section_lines.get("network")) from None

    sim_kw = dict(values["sim"])
    decim = int(sim_kw.pop("decimation", 100))
    scenario_kw = {
        "dt": sim_kw.pop("dt"),
        "t_end": sim_kw.pop("t_end"),
        "p_load0": sim_kw.pop("p_load", 0.0),
        "decimation": decim,
        "i_max": sim_kw.pop("i_max", 60.0),
        "v_min": sim_kw.pop("v_min", 50.0),
    }
    try:
        scenario = Scenario(params=params, network=network,
                            events=tuple(events), **scenario_kw)
    except ValueError as exc:
        bad_line = section_lines.get("sim")
        if events and "event" in str(exc):
            bad_line = event_lines[0]
        raise _rebuild(exc, key_lines, bad_line) from None
    return params, scenario


def _parse_event(line: str, line_no: int) -> Event:
    fields: dict[str, str] = {}
    for tok in line.split():
        if "=" not in tok:
            raise ConfigError(f"event token {tok!r} is not key=value", line_no)
        k, _, v = tok.partition("=")
        if k in fields:
            raise ConfigError(f"duplicate event field {k!r}", line_no)
        fields[k] = v
    if "t" not in fields or "action" not in fields:
        raise ConfigError("event needs at least t=<s> and action=<name>", line_no)
    action = fields.pop("action")
    if action not in _EVENT_FIELDS:
        raise ConfigError(f"unknown event action {action!r}", line_no)
    t = _parse_float(fields.pop("t"), "t", line_no)
    spec_fields = _EVENT_FIELDS[action]
    unknown = set(fields) - set(spec_fields)
    if unknown:
        raise ConfigError(
            f"unknown field(s) {sorted(unknown)} for event {action!r}", line_no)
    kwargs = {}
    for name, conv in spec_fields.items():
        if name not in fields:
            raise ConfigError(f"event {action!r} needs field {name!r}", line_no)
        raw = fields[name]
        kwargs[name] = raw if conv is str else _parse_float(raw, name, line_no)
    try:
        return Event(t=t, action=action, **kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc), line_no) from None


def parse_config_file(path) -> tuple[ConverterParams, Scenario]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def serialize_config(params: ConverterParams, scenario: Scenario) -> str:
    """Canonical text form; parse(serialize(...)) reproduces the objects."""
    out = ["[converter]"]
    for key in _CONVERTER_KEYS:
        out.append(f"{key} = {getattr(params, key)!r}")
    net = scenario.network
    out += ["", "[network]"]
    for key in _NETWORK_KEYS:
        out.append(f"{key} = {getattr(net, key)!r}")
    out += ["", "[sim]"]
    out.append(f"dt = {scenario.dt!r}")
    out.append(f"t_end = {scenario.t_end!r}")
    out.append(f"p_load = {scenario.p_load0!r}")
    out.append(f"decimation = {scenario.decimation}")
    out.append(f"i_max = {scenario.i_max!r}")
    out.append(f"v_min = {scenario.v_min!r}")
    if scenario.events:
        out += ["", "[events]"]
        for ev in scenario.events:
            parts = [f"t={ev.t!r}", f"action={ev.action}"]
            for name in _EVENT_FIELDS[ev.action]:
                val = getattr(ev, name)
                parts.append(f"{name}={val if isinstance(val, str) else repr(val)}")
            out.append(" ".join(parts))
    return "\n".join(out) + "\n"
