"""Strict run configuration.

A config is a TOML document::

    experiment = "thresholds"
    seed = 0
    output_dir = "out/thresholds"

    [cell]
    kind = "PcbResistor"

    [fets.in1_n]          # per-role MosfetParams overrides
    vth0 = 0.52

    [solver]
    damping = 0.3

    [thresholds]
    element = "M1"
    count = 16

Unknown sections or keys are errors. Values given with ``--set a.b=v`` are
parsed as TOML literals, falling back to bare strings.
"""

from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
import re
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .camcell import ROLES, CellKind
from .devices import MosfetParams
from .solver import SolveOptions

EXPERIMENTS = ("sweep", "thresholds", "supply", "energy", "corners", "montecarlo", "memristor")

_FET_FIELDS = {f.name for f in dataclasses.fields(MosfetParams)} - {"polarity"}

SCHEMA = {
    "": {"experiment": None, "seed": 0, "output_dir": "out"},
    "cell": {"kind": "PcbResistor", "orientation": "canonical", "supply": 1.8,
             "temperature": 25.0},
    "solver": {f.name: f.default for f in dataclasses.fields(SolveOptions)},
    "sweep": {"m1": None, "m2": None, "samples": None},
    "thresholds": {"element": "M1", "count": 16, "fixed_other": None, "samples": None},
    "supply": {"supplies": [1.2, 1.4, 1.6, 1.8, 2.0, 2.2, 2.4]},
    "energy": {"m1": None, "m2": None, "v_test": [0.9], "park": None, "pulse": 450e-12,
               "dt": 1e-12},
    "corners": {"variants": ["IntegratedMinimum", "IntegratedWide", "IntegratedNative"],
                "shift": 0.1, "energy": True},
    "montecarlo": {"run_count": 250, "a_vt": 3.5e-9, "a_kp": 1e-8, "samples": None,
                   "bins": 20},
    "memristor": {"element": "M1", "count": 16, "relax_rate": 0.0, "telegraph": False,
                  "r_a": 6e6, "r_b": 8e6, "switch_prob": 0.2, "samples": 1801,
                  "ceiling": 10e6},
}


class ConfigError(ValueError):
    pass


def _line_of(text: str, section: str, key: str) -> int | None:
    if text is None:
        return None
    current = ""
    for n, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[\s*([^\]]+?)\s*\]", line)
        if m:
            current = m.group(1)
            if not key and current == section:
                return n
            continue
        m = re.match(r"\s*([A-Za-z0-9_.\-\"]+)\s*=", line)
        if m and key:
            name = m.group(1).strip('"')
            full = f"{current}.{name}" if current else name
            if full == (f"{section}.{key}" if section else key):
                return n
    return None


def _error(msg, text, section, key):
    line = _line_of(text, section, key)
    where = f" (line {line})" if line else ""
    raise ConfigError(f"{msg}{where}")


def defaults() -> dict:
    cfg = {}
    for section, keys in SCHEMA.items():
        target = cfg if section == "" else cfg.setdefault(section, {})
        target.update(copy.deepcopy(keys))
    cfg["fets"] = {}
    return cfg


def _merge(cfg: dict, raw: dict, text: str | None) -> dict:
    for key, value in raw.items():
        if key == "fets":
            if not isinstance(value, dict):
                _error("fets must be a table of roles", text, "", "fets")
            for role, fields in value.items():
                if role not in ROLES:
                    _error(f"unknown key 'fets.{role}'", text, f"fets.{role}", "")
                if not isinstance(fields, dict):
                    _error(f"fets.{role} must be a table", text, "fets", role)
                for fname, fval in fields.items():
                    if fname not in _FET_FIELDS:
                        _error(f"unknown key 'fets.{role}.{fname}'", text, f"fets.{role}", fname)
                    cfg["fets"].setdefault(role, {})[fname] = fval
        elif key in SCHEMA and key != "":
            if not isinstance(value, dict):
                _error(f"'{key}' must be a table", text, "", key)
            for sub, sval in value.items():
                if sub not in SCHEMA[key]:
                    _error(f"unknown key '{key}.{sub}'", text, key, sub)
                cfg[key][sub] = sval
        elif key in SCHEMA[""]:
            cfg[key] = value
        else:
            _error(f"unknown key '{key}'", text, "", key)
    return cfg


def parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_override(cfg: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not key=value")
    key, raw = assignment.split("=", 1)
    key = key.strip()
    parts = key.split(".")
    value = parse_value(raw.strip())
    if parts[0] == "fets":
        if len(parts) != 3 or parts[1] not in ROLES or parts[2] not in _FET_FIELDS:
            raise ConfigError(f"unknown key '{key}'")
        cfg["fets"].setdefault(parts[1], {})[parts[2]] = value
    elif len(parts) == 1 and parts[0] in SCHEMA[""]:
        cfg[parts[0]] = value
    elif len(parts) == 2 and parts[0] in SCHEMA and parts[0] and parts[1] in SCHEMA[parts[0]]:
        cfg[parts[0]][parts[1]] = value
    else:
        raise ConfigError(f"unknown key '{key}'")


def validate(cfg: dict) -> dict:
    if cfg.get("experiment") not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {cfg.get('experiment')!r}")
    try:
        CellKind(cfg["cell"]["kind"])
    except ValueError:
        raise ConfigError(f"unknown cell.kind {cfg['cell']['kind']!r}") from None
    if cfg["cell"]["orientation"] not in ("canonical", "mirrored"):
        raise ConfigError("cell.orientation must be 'canonical' or 'mirrored'")
    if not isinstance(cfg["seed"], int):
        raise ConfigError("seed must be an integer")
    try:
        SolveOptions(**cfg["solver"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solver: {exc}") from None
    return cfg


def load(path=None, overrides=(), text: str | None = None) -> dict:
    """Resolve a config file (TOML, or a JSON run manifest) plus overrides."""
    cfg = defaults()
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc}") from None
        if p.suffix == ".json":
            try:
                raw = json.loads(text)["config"]
            except (json.JSONDecodeError, KeyError) as exc:
                raise ConfigError(f"{p}: not a run manifest ({exc})") from None
            text = None
        else:
            raw = _parse_toml(text, p)
        _merge(cfg, raw, text)
    elif text is not None:
        _merge(cfg, _parse_toml(text, "<string>"), text)
    for o in overrides:
        apply_override(cfg, o)
    return validate(cfg)


def _parse_toml(text, name):
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{name}: {exc}") from None


def config_hash(cfg: dict) -> str:
    """Short digest of everything that affects results (not ``output_dir``)."""
    body = {k: v for k, v in cfg.items() if k != "output_dir"}
    blob = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
