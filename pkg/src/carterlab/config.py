"""Run configuration: YAML text in, validated nested dict out.

Every key has a default; unknown keys raise :class:`SchemaError` naming the
key path, and physical-domain violations raise :class:`RangeError` here,
before any numerics run.
"""

from __future__ import annotations

import copy
import math
from typing import Any

import yaml

from .errors import RangeError, SchemaError

SCHEMA_VERSION = 1

COMMANDS = ("cert", "slab-spectrum", "slab-evolve", "modes", "kn-check", "horizon-extremal")

DEFAULTS: dict = {
    "command": "cert",
    # Kerr-Newman triple used by modes (zero frequency), kn-check and horizon-extremal
    "M": 1.0,
    "a": 0.5,
    "Q": 0.0,
    "params": {
        "M": 1.0, "a": 0.5, "Lambda": 0.0, "k": 0.0,
        "C1": 0.0, "C2": 0.0, "C3": 0.0, "C4": 0.0, "C5": 0.0,
    },
    "slab": {"r_minus": 3.0, "r_plus": 5.0, "x_minus": -0.5, "x_plus": 0.5, "margin": 1e-8},
    "numerics": {
        "resolution": 32, "dt": None, "tol": 1e-12, "seed": 0, "count": 6, "order": 12,
        "T": 10.0, "record_every": 1,
    },
    "cert": {"mode": "full", "points": 50, "fault": False},
    "spectrum": {"flat": False, "pencil_modes": [0, 1, 2], "pencil_resolution": 13},
    "evolve": {"data": "random", "m": 0, "drift_tol": 1e-10},
    "modes": {
        "task": "angular", "Omega": 0.0, "m": 0, "lam": 0.0, "interval": [-1.0, 1.0], "bc": "regular",
        "family": "kerr", "ells": [0, 1, 2], "r_span": [3.0, 10.0], "scan": None,
    },
    "kn": {"R_w": 2.5, "strict_range": True, "sweep": None},
    "horizon": {
        "n_r": 128, "n_theta": 8, "collar": 0.5, "dv": None, "n_steps": 200, "data": "bump",
        "amplitude": 1.0, "support": 0.25, "refine": True, "order_min": None,
    },
    "output": {"path": None, "format": "csv"},
}

# keys whose value is free-form (validated by the command itself)
_OPEN = {("modes", "scan"), ("kn", "sweep"), ("numerics", "dt"), ("horizon", "order_min")}
_NUMERIC_OPEN = (("numerics", "dt"), ("horizon", "order_min"))
_ENUMS = {
    ("command",): COMMANDS,
    ("cert", "mode"): ("full", "spot"),
    ("evolve", "data"): ("random", "threshold", "eigenmode"),
    ("modes", "task"): ("angular", "radial", "frobenius", "zero-frequency"),
    ("modes", "family"): ("kerr", "rn", "kn", "extremal-kn"),
    ("modes", "bc"): ("neumann", "dirichlet", "regular"),
    ("horizon", "data"): ("constant", "bump", "step"),
    ("output", "format"): ("csv", "json"),
}


def _number(text: str, path: tuple):
    # YAML 1.1 reads exponent forms such as 1e-3 as strings
    try:
        return float(text)
    except ValueError:
        raise SchemaError(".".join(path), "expected a number") from None


def _merge(default: Any, given: Any, path: tuple) -> Any:
    if isinstance(default, dict):
        if not isinstance(given, dict):
            raise SchemaError(".".join(path), "expected a mapping")
        out = copy.deepcopy(default)
        for key, val in given.items():
            key = str(key)
            if key not in default:
                raise SchemaError(".".join(path + (key,)), f"unknown key '{key}'")
            out[key] = _merge(default[key], val, path + (key,))
        return out
    if isinstance(given, str) and (isinstance(default, float) or path in _NUMERIC_OPEN):
        given = _number(given, path)
    if path in _OPEN or default is None:
        return given
    if isinstance(default, bool):
        if not isinstance(given, bool):
            raise SchemaError(".".join(path), "expected a boolean")
        return given
    if isinstance(default, int):
        if isinstance(given, bool) or not isinstance(given, int):
            raise SchemaError(".".join(path), "expected an integer")
        return given
    if isinstance(default, float):
        if isinstance(given, bool) or not isinstance(given, (int, float)):
            raise SchemaError(".".join(path), "expected a number")
        return float(given)
    if isinstance(default, str):
        if not isinstance(given, str):
            raise SchemaError(".".join(path), "expected a string")
        allowed = _ENUMS.get(path)
        if allowed and given.lower() not in allowed:
            raise SchemaError(".".join(path), f"'{given}' not one of {list(allowed)}")
        return given.lower()
    if isinstance(default, list):
        if not isinstance(given, list):
            raise SchemaError(".".join(path), "expected a list")
        return list(given)
    return given  # pragma: no cover


def _check_ranges(cfg: dict) -> None:
    cmd = cfg["command"]
    num = cfg["numerics"]
    if num["resolution"] < 4:
        raise RangeError("numerics.resolution must be at least 4")
    if num["count"] < 1:
        raise RangeError("numerics.count must be positive")
    if not num["tol"] > 0:
        raise RangeError("numerics.tol must be positive")
    if num["dt"] is not None and not (isinstance(num["dt"], (int, float)) and num["dt"] > 0):
        raise RangeError("numerics.dt must be a positive number or null")
    if not num["T"] > 0:
        raise RangeError("numerics.T must be positive")
    s = cfg["slab"]
    if cmd in ("slab-spectrum", "slab-evolve"):
        if not (s["r_minus"] < s["r_plus"] and s["x_minus"] < s["x_plus"]):
            raise RangeError("slab bounds must be increasing")
        if cfg["params"]["k"] != 0:
            raise RangeError("slab commands require k = 0")
    M, a, Q = cfg["M"], cfg["a"], cfg["Q"]
    if cmd in ("kn-check", "modes", "horizon-extremal") and M <= 0:
        raise RangeError("M must be positive")
    disc = M * M - a * a - Q * Q
    if cmd == "kn-check":
        if disc < 0:
            raise RangeError(f"superextremal parameters: a^2 + Q^2 = {a * a + Q * Q} > M^2 = {M * M}")
        if disc == 0:
            raise RangeError("kn-check requires a subextremal background")
        rw = cfg["kn"]["R_w"]
        if cfg["kn"]["strict_range"] and not (2 * M < rw < 8 * M / 3):
            raise RangeError(f"kn.R_w = {rw} outside (2M, 8M/3)")
    if cmd == "horizon-extremal":
        if abs(disc) > 1e-12 * M * M:
            raise RangeError("horizon-extremal requires a^2 + Q^2 = M^2")
        h = cfg["horizon"]
        if h["n_r"] < 8 or h["n_theta"] < 2 or h["n_steps"] < 1:
            raise RangeError("horizon grid/step counts too small")
        if h["order_min"] is not None and not (isinstance(h["order_min"], (int, float)) and h["order_min"] > 0):
            raise RangeError("horizon.order_min must be a positive number or null")
        if not (0 < h["support"] <= h["collar"]) or h["collar"] <= 0:
            raise RangeError("need 0 < horizon.support <= horizon.collar")
    if cmd == "modes" and cfg["modes"]["task"] == "zero-frequency":
        fam = cfg["modes"]["family"]
        if fam == "extremal-kn" and abs(disc) > 1e-12 * M * M:
            raise RangeError("extremal family requires a^2 + Q^2 = M^2")
        if fam != "extremal-kn" and disc <= 0:
            raise RangeError("nonextremal families require a^2 + Q^2 < M^2")
    if cfg["cert"]["points"] < 1:
        raise RangeError("cert.points must be positive")


def resolve(data: dict | None) -> dict:
    """Merge ``data`` into the defaults, validate types, enums and ranges."""
    data = {} if data is None else data
    if not isinstance(data, dict):
        raise SchemaError("", "top level must be a mapping")
    cfg = _merge(DEFAULTS, data, ())
    _check_ranges(cfg)
    if cfg["output"]["path"] is None:
        cfg["output"]["path"] = f"carterlab_out/{cfg['command']}"
    return cfg


def parse_config(text: str) -> dict:
    """Parse YAML config text into a resolved, validated config."""
    try:
        data = yaml.safe_load(text) if text.strip() else {}
    except yaml.YAMLError as exc:
        raise SchemaError("", f"not valid YAML: {exc}") from exc
    return resolve(data)


def apply_override(data: dict, assignment: str) -> None:
    """Apply ``key.path=value`` (value parsed as YAML) to a raw config dict in place."""
    if "=" not in assignment:
        raise SchemaError(assignment, "override must look like key.path=value")
    key, raw = assignment.split("=", 1)
    parts = key.strip().split(".")
    node = data
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise SchemaError(key, "cannot descend into a non-mapping value")
    node[parts[-1]] = yaml.safe_load(raw)


def parse_scan(spec: str) -> dict:
    """'start:stop:num' -> {'start', 'stop', 'num'}."""
    try:
        a, b, n = spec.split(":")
        out = {"start": float(a), "stop": float(b), "num": int(n)}
    except ValueError as exc:
        raise SchemaError("modes.scan", "expected start:stop:num") from exc
    if out["num"] < 1 or not math.isfinite(out["start"]) or not math.isfinite(out["stop"]):
        raise RangeError("scan needs num >= 1 and finite bounds")
    return out
