"""Scenario configuration files (TOML) and their validation.

A config names the experiment ``kind``, a mandatory ``seed``, a non-empty
``sweep`` list and one parameter table named after the kind::

    kind = "fault"
    seed = 1
    sweep = [0, 5, 10, 20, 30]

    [fault]
    model = "long"
    d_true = 0.5

Complex values are written as ``[re, im]`` pairs. Every key is checked; the
error message names the offending key path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

__all__ = ["ConfigError", "ScenarioConfig", "parse_config", "load_config", "KINDS"]

KINDS = ("fault", "voltage", "event", "gps")


class ConfigError(ValueError):
    """Invalid configuration; ``location`` is the dotted key path."""

    def __init__(self, location: str, message: str):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location
        self.message = message


@dataclass
class ScenarioConfig:
    kind: str
    seed: int
    sweep: list[float]
    params: dict[str, Any]
    output_dir: str | None = None
    source: str = field(default="", repr=False)


# --- value coercion --------------------------------------------------------


def _number(path, v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"expected a number, got {type(v).__name__}")
    if not math.isfinite(v):
        raise ConfigError(path, "must be finite")
    return float(v)


def _integer(path, v):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(path, f"expected an integer, got {type(v).__name__}")
    return v


def _complex(path, v):
    if isinstance(v, list):
        if len(v) != 2:
            raise ConfigError(path, "complex values are [re, im] pairs")
        return complex(_number(f"{path}[0]", v[0]), _number(f"{path}[1]", v[1]))
    return complex(_number(path, v))


def _string(path, v):
    if not isinstance(v, str):
        raise ConfigError(path, f"expected a string, got {type(v).__name__}")
    return v


def _boolean(path, v):
    if not isinstance(v, bool):
        raise ConfigError(path, f"expected true/false, got {type(v).__name__}")
    return v


def _choice(*options):
    def conv(path, v):
        v = _string(path, v)
        if v not in options:
            raise ConfigError(path, f"must be one of {', '.join(options)}; got {v!r}")
        return v

    return conv


def _bounded(conv, lo=None, hi=None, lo_open=False, hi_open=False):
    def check(path, v):
        x = conv(path, v)
        bad = (lo is not None and (x <= lo if lo_open else x < lo)) or (
            hi is not None and (x >= hi if hi_open else x > hi)
        )
        if bad:
            lb = ("(" if lo_open else "[") + ("-inf" if lo is None else repr(lo))
            ub = ("inf" if hi is None else repr(hi)) + (")" if hi_open else "]")
            raise ConfigError(path, f"value {x!r} out of range {lb}, {ub}")
        return x

    return check


def _positive(conv=_number):
    return _bounded(conv, 0, None, lo_open=True)


def _pair(path, v):
    if not isinstance(v, list) or len(v) != 2:
        raise ConfigError(path, "expected an [x, y] pair")
    return (_number(f"{path}[0]", v[0]), _number(f"{path}[1]", v[1]))


def _triple(path, v):
    if not isinstance(v, list) or len(v) != 3:
        raise ConfigError(path, "expected an [x, y, t] triple")
    return tuple(_number(f"{path}[{k}]", x) for k, x in enumerate(v))


def _list_of(conv, min_len=0):
    def check(path, v):
        if not isinstance(v, list):
            raise ConfigError(path, "expected a list")
        if len(v) < min_len:
            raise ConfigError(path, f"needs at least {min_len} entries")
        return [conv(f"{path}[{k}]", x) for k, x in enumerate(v)]

    return check


def _table(schema):
    def check(path, v):
        if not isinstance(v, dict):
            raise ConfigError(path, "expected a table")
        return _apply_schema(path, v, schema)

    return check


_REQUIRED = object()

Schema = dict[str, tuple[Callable, Any]]

FAULT_SCHEMA: Schema = {
    "model": (_choice("short", "medium", "long"), "long"),
    "d_true": (_bounded(_number, 0, 1, True, True), 0.5),
    "zf": (_complex, None),
    "fault_type": (_choice("ABC", "AB", "A"), "ABC"),
    "z_ground": (_complex, 10.0),
    "z1": (_complex, None),
    "y1": (_complex, None),
    "length": (_positive(), None),
    "es_magnitude": (_positive(), 199.186e3),
    "es_angle_deg": (_number, 10.0),
    "er_magnitude": (_positive(), 199.186e3),
    "er_angle_deg": (_number, 0.0),
    "zs_s": (_complex, 2.0 + 20.0j),
    "zs_r": (_complex, 2.0 + 20.0j),
    "t_fault": (_bounded(_number, 0), 5.0),
    "duration": (_positive(), 10.0),
    "frame_rate": (_positive(), 30.0),
    "noise_sigma": (_bounded(_number, 0), 0.0),
    "threshold_ratio": (_bounded(_number, 1, None, lo_open=True), 5.0),
    "no_fault": (_boolean, False),
}

VOLTAGE_SCHEMA: Schema = {
    "e0": (_positive(), 1.05),
    "modulation": (_bounded(_number, 0, 1, hi_open=True), 0.03),
    "modulation_freq": (_positive(), 1.0),
    "z_source": (_complex, 0.005 + 0.05j),
    "line_impedance": (_complex, 0.02 + 0.30j),
    "p_load": (_positive(), 0.6),
    "power_factor": (_bounded(_number, 0, 1, lo_open=True), 0.85),
    "fault_start": (_bounded(_number, 0), 2.0),
    "fault_end": (_bounded(_number, 0), 2.5),
    "fault_impedance": (_complex, 0.05),
    "no_fault": (_boolean, False),
    "trip_times": (_list_of(_number), [4.0, 6.0]),
    "frame_rate": (_positive(), 30.0),
    "duration": (_positive(), 10.0),
    "noise_sigma": (_bounded(_number, 0), 0.0),
    "window": (_bounded(_integer, 4), 20),
}

_MMR_SCHEMA: Schema = {
    "id": (_string, _REQUIRED),
    "x": (_number, _REQUIRED),
    "y": (_number, _REQUIRED),
    "t": (_number, None),
}

EVENT_SCHEMA: Schema = {
    "v_e": (_positive(), 500.0),
    "event": (_triple, None),
    "mmrs": (_list_of(_table(_MMR_SCHEMA), 4), _REQUIRED),
    "victim_id": (_string, None),
    "noise_sigma": (_bounded(_number, 0), 0.0),
}

_SAT_SCHEMA: Schema = {
    "power": (_bounded(_number, 0), 1.0),
    "code_phase": (_bounded(_number, 0, 1023, hi_open=True), _REQUIRED),
    "doppler": (_bounded(_number, -10e3, 10e3), 0.0),
}

GPS_SCHEMA: Schema = {
    "prn": (_bounded(_integer, 1, 32), 1),
    "authentic": (_table(_SAT_SCHEMA), _REQUIRED),
    "spoof": (_table(_SAT_SCHEMA), _REQUIRED),
    "noise_sigma": (_bounded(_number, 0), 0.5),
    "jam_sigma": (_bounded(_number, 0), 3.0),
    "trials": (_bounded(_integer, 1), 10),
    "sample_rate": (_positive(), 4.092e6),
    "duration_ms": (_bounded(_number, 1), 1.0),
    "doppler_span": (_positive(), 10e3),
    "doppler_step": (_positive(), 500.0),
    "f0": (_positive(), 60.0),
    "dump_grid": (_boolean, False),
}

SCHEMAS = {"fault": FAULT_SCHEMA, "voltage": VOLTAGE_SCHEMA, "event": EVENT_SCHEMA, "gps": GPS_SCHEMA}


def _apply_schema(prefix: str, raw: dict, schema: Schema) -> dict:
    out = {}
    for key in raw:
        if key not in schema:
            raise ConfigError(f"{prefix}.{key}" if prefix else key, "unknown key")
    for key, (conv, default) in schema.items():
        path = f"{prefix}.{key}" if prefix else key
        if key in raw:
            out[key] = conv(path, raw[key])
        elif default is _REQUIRED:
            raise ConfigError(path, "missing required key")
        else:
            out[key] = default
    return out


def _check_cross(kind: str, p: dict):
    if kind == "fault" and p["t_fault"] >= p["duration"]:
        raise ConfigError("fault.t_fault", "must be earlier than fault.duration")
    if kind == "voltage":
        if len(p["trip_times"]) > 2:
            raise ConfigError("voltage.trip_times", "at most two lines can be tripped")
        ev = ([] if p["no_fault"] else [p["fault_start"], p["fault_end"]]) + p["trip_times"]
        if any(b <= a for a, b in zip(ev, ev[1:])) or (ev and ev[-1] >= p["duration"]):
            raise ConfigError("voltage.trip_times", "event times must increase strictly within the duration")
    if kind == "event":
        have_t = [m["t"] is not None for m in p["mmrs"]]
        if p["event"] is None and not all(have_t):
            raise ConfigError("event.mmrs", "every recorder needs t unless event = [x, y, t] is given")
        ids = [m["id"] for m in p["mmrs"]]
        if len(set(ids)) != len(ids):
            raise ConfigError("event.mmrs", "recorder ids must be unique")
        if p["victim_id"] is not None and p["victim_id"] not in ids:
            raise ConfigError("event.victim_id", f"no recorder with id {p['victim_id']!r}")


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate a TOML scenario description."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("", f"malformed TOML: {exc}") from None
    if "kind" not in raw:
        raise ConfigError("kind", "missing required key")
    kind = _choice(*KINDS)("kind", raw["kind"])
    allowed = {"kind", "seed", "sweep", "output_dir", kind}
    for key in raw:
        if key not in allowed:
            raise ConfigError(key, "unknown key")
    if "seed" not in raw:
        raise ConfigError("seed", "missing required key")
    seed = _bounded(_integer, 0)("seed", raw["seed"])
    if "sweep" not in raw:
        raise ConfigError("sweep", "missing required key")
    sweep = _list_of(_number, 1)("sweep", raw["sweep"])
    out_dir = _string("output_dir", raw["output_dir"]) if "output_dir" in raw else None
    block = raw.get(kind, {})
    params = _table(SCHEMAS[kind])(kind, block)
    _check_cross(kind, params)
    if kind == "gps":
        for k, r in enumerate(sweep):
            if r < 0:
                raise ConfigError(f"sweep[{k}]", "power ratios must be non-negative")
    return ScenarioConfig(kind, seed, sweep, params, out_dir, text)


def load_config(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
