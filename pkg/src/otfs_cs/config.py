"""JSON scenario files.

Example::

    {
      "grid": {"D": 16, "V": 16, "Ts": 1.0},
      "paths": 3,
      "snr_db": [0, 10, 20, 30, "inf"],
      "trials": 100,
      "master_seed": 7,
      "max_iter": 64,
      "bank_method": "fft",
      "methods": [
        {"name": "omp-k1", "algorithm": "omp", "kappa": 1},
        {"name": "omp-k4", "algorithm": "omp", "K_tau": 64, "K_nu": 64},
        {"name": "ompbr-n10", "algorithm": "ompbr", "kappa": 1, "N_ref": 10}
      ]
    }

``kappa`` is shorthand for ``K_tau = kappa*D, K_nu = kappa*V``.  Delays and
Dopplers never appear in physical units; everything scales with ``Ts``.
"""

from __future__ import annotations

import json
import math

from otfs_cs.harness import MethodSpec, ScenarioConfig

SCENARIO_KEYS = {"grid", "paths", "snr_db", "trials", "master_seed", "max_iter",
                 "bank_method", "methods"}
METHOD_KEYS = {"name", "algorithm", "K_tau", "K_nu", "kappa", "N_ref"}


class ConfigError(ValueError):
    pass


def _int(obj, key, where, default=None, minimum=None):
    if key not in obj:
        if default is None:
            raise ConfigError(f"{where}.{key}: missing required field")
        return default
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, int):
        raise ConfigError(f"{where}.{key}: expected an integer, got {val!r}")
    if minimum is not None and val < minimum:
        raise ConfigError(f"{where}.{key}: must be >= {minimum}, got {val}")
    return val


def _snr(val, where):
    if isinstance(val, str) and val.lower() in ("inf", "+inf", "infinity"):
        return math.inf
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{where}: expected a number or \"inf\", got {val!r}")
    return float(val)


def _unknown(obj, allowed, where):
    extra = sorted(set(obj) - allowed)
    if extra:
        raise ConfigError(f"{where}: unknown field(s) {', '.join(extra)}")


def parse_method(obj, where, D, V) -> MethodSpec:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")
    _unknown(obj, METHOD_KEYS, where)
    name = obj.get("name")
    if not isinstance(name, str) or not name:
        raise ConfigError(f"{where}.name: expected a non-empty string")
    algo = obj.get("algorithm")
    if algo not in ("omp", "ompbr"):
        raise ConfigError(f"{where}.algorithm: expected \"omp\" or \"ompbr\", got {algo!r}")
    if "kappa" in obj:
        if "K_tau" in obj or "K_nu" in obj:
            raise ConfigError(f"{where}: give either kappa or K_tau/K_nu, not both")
        kappa = _int(obj, "kappa", where, minimum=1)
        K_tau, K_nu = kappa * D, kappa * V
    else:
        K_tau = _int(obj, "K_tau", where, minimum=1)
        K_nu = _int(obj, "K_nu", where, minimum=1)
    n_ref = _int(obj, "N_ref", where, default=0, minimum=0)
    try:
        return MethodSpec(name, algo, K_tau, K_nu, n_ref)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def parse_scenario(obj) -> ScenarioConfig:
    if not isinstance(obj, dict):
        raise ConfigError("config: top level must be an object")
    _unknown(obj, SCENARIO_KEYS, "config")
    grid = obj.get("grid")
    if not isinstance(grid, dict):
        raise ConfigError("config.grid: expected an object with D, V and optional Ts")
    _unknown(grid, {"D", "V", "Ts"}, "config.grid")
    D = _int(grid, "D", "config.grid", minimum=1)
    V = _int(grid, "V", "config.grid", minimum=1)
    Ts = grid.get("Ts", 1.0)
    if isinstance(Ts, bool) or not isinstance(Ts, (int, float)) or not Ts > 0:
        raise ConfigError(f"config.grid.Ts: expected a positive number, got {Ts!r}")
    snrs = obj.get("snr_db")
    if not isinstance(snrs, list) or not snrs:
        raise ConfigError("config.snr_db: expected a non-empty list")
    snr_list = tuple(_snr(s, f"config.snr_db[{i}]") for i, s in enumerate(snrs))
    methods = obj.get("methods")
    if not isinstance(methods, list) or not methods:
        raise ConfigError("config.methods: expected a non-empty list")
    specs = tuple(parse_method(m, f"config.methods[{i}]", D, V) for i, m in enumerate(methods))
    names = [m.name for m in specs]
    if len(set(names)) != len(names):
        raise ConfigError("config.methods: method names must be unique")
    max_iter = obj.get("max_iter")
    if max_iter is not None:
        max_iter = _int(obj, "max_iter", "config", minimum=1)
    bank_method = obj.get("bank_method", "fft")
    if bank_method not in ("fft", "dense"):
        raise ConfigError(f"config.bank_method: expected \"fft\" or \"dense\", got {bank_method!r}")
    return ScenarioConfig(
        D=D, V=V, Ts=float(Ts),
        P=_int(obj, "paths", "config", minimum=1),
        snr_db_list=snr_list,
        trials=_int(obj, "trials", "config", minimum=1),
        methods=specs,
        master_seed=_int(obj, "master_seed", "config", default=0),
        max_iter=max_iter,
        bank_method=bank_method,
    )


def load_scenario(path) -> ScenarioConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_scenario(obj)
