"""Declarative run description: TOML schema, defaults, validation and hashing."""

from __future__ import annotations

import copy
import hashlib
import json
import math
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import numpy as np

from .bath import ModelParams, SpectralDensity, discretize
from .dynmap import qubit_state

PIPELINES = ("thermal", "survival")

DEFAULTS = {
    "pipeline": "thermal",
    "description": "",
    "model": {"Omega": 1.0, "beta": math.inf, "lambda": 1.0},
    "bath": {"family": "ohmic", "scale": 0.05, "exponent": 1.0, "cutoff": 1.0,
             "cutoff_shape": "exponential", "level": 0.0, "lo": 0.0, "hi": 1.0,
             "omega0": 1.0, "g": 0.0},
    "discretization": {"modes": 3, "scheme": "midpoint", "window": None},
    "truncation": {"max_excitations": 3, "min_weight": 0.999, "convergence_check": True},
    "time": {"t_max": 10.0, "steps": 100},
    "initial": {"state": "excited"},
    "gkls": {"d_min": 1e-6, "closure_d_floor": 0.01, "self_test": True},
    "thermo": {"van_hove": False, "reservoir": False, "weak_coupling_lambda": 1.0},
    "survival": {"nodes_per_panel": 8, "tail": True},
    "output": {"format": "csv"},
}

# sections that do not change the numbers and stay out of the config hash
UNHASHED = ("output", "description")


class ConfigError(ValueError):
    """Bad scenario: carries the dotted key at fault."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


@dataclass(frozen=True)
class Scenario:
    config: dict
    source: str

    @property
    def pipeline(self) -> str:
        return self.config["pipeline"]

    @property
    def params(self) -> ModelParams:
        m = self.config["model"]
        return ModelParams(m["Omega"], m["beta"], m["lambda"])

    @property
    def density(self) -> SpectralDensity:
        return make_density(self.config["bath"])

    def bath(self):
        d = self.config["discretization"]
        window = tuple(d["window"]) if d["window"] is not None else None
        return discretize(self.density, d["modes"], d["scheme"], window)

    @property
    def times(self) -> np.ndarray:
        t = self.config["time"]
        return np.linspace(0.0, t["t_max"], t["steps"] + 1)

    @property
    def initial_state(self) -> np.ndarray:
        return parse_state(self.config["initial"]["state"])

    def with_overrides(self, **sections) -> "Scenario":
        cfg = copy.deepcopy(self.config)
        for sec, vals in sections.items():
            if isinstance(vals, dict):
                cfg[sec].update(vals)
            else:
                cfg[sec] = vals
        return Scenario(cfg, self.source)

    def normalized(self) -> dict:
        return {k: v for k, v in self.config.items() if k not in UNHASHED}

    def config_hash(self) -> str:
        blob = json.dumps(_jsonable(self.normalized()), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return x


def make_density(b: dict) -> SpectralDensity:
    fam = b["family"]
    if fam == "ohmic":
        return SpectralDensity.ohmic(b["scale"], b["exponent"], b["cutoff"], b["cutoff_shape"])
    if fam == "flat":
        return SpectralDensity.flat(b["level"], b["lo"], b["hi"])
    if fam == "single":
        return SpectralDensity.single(b["omega0"], b["g"])
    raise ConfigError("bath.family", f"unknown spectral family {fam!r}; expected ohmic, flat or single")


def parse_state(spec):
    if isinstance(spec, str):
        return qubit_state(spec)
    arr = np.asarray(spec, dtype=float)
    # explicit matrices are written as [[re, im], ...] pairs per entry
    if arr.shape == (2, 2, 2):
        return qubit_state(arr[..., 0] + 1j * arr[..., 1])
    return qubit_state(arr)


def _merge(defaults: dict, given: dict, prefix: str = "") -> dict:
    out = copy.deepcopy(defaults)
    for key, val in given.items():
        dotted = f"{prefix}{key}"
        if key not in defaults:
            raise ConfigError(dotted, "unknown key")
        if isinstance(defaults[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(dotted, "expected a table")
            out[key] = _merge(defaults[key], val, dotted + ".")
        else:
            out[key] = val
    return out


def _number(cfg, sec, key, cast=float):
    v = cfg[sec][key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{sec}.{key}", f"expected a number, got {v!r}")
    if cast is int:
        if int(v) != v:
            raise ConfigError(f"{sec}.{key}", f"expected an integer, got {v!r}")
        return int(v)
    return float(v)


def normalize(raw: dict, source: str = "<memory>") -> Scenario:
    """Fill defaults, coerce types and check every precondition that needs no dynamics."""
    if "model" in raw and isinstance(raw["model"], dict):
        raw = copy.deepcopy(raw)
        m = raw["model"]
        if "beta_Omega" in m:
            if "beta" in m:
                raise ConfigError("model.beta_Omega", "give either beta or beta_Omega, not both")
            bo = m.pop("beta_Omega")
            if isinstance(bo, bool) or not isinstance(bo, (int, float)):
                raise ConfigError("model.beta_Omega", f"expected a number, got {bo!r}")
            m["beta"] = float(bo) / float(m.get("Omega", DEFAULTS["model"]["Omega"]))
        if isinstance(m.get("beta"), str):
            if m["beta"] != "vacuum":
                raise ConfigError("model.beta", f"expected a number or \"vacuum\", got {m['beta']!r}")
            m["beta"] = math.inf
    cfg = _merge(DEFAULTS, raw)
    if cfg["pipeline"] not in PIPELINES:
        raise ConfigError("pipeline", f"unknown pipeline {cfg['pipeline']!r}; expected one of {PIPELINES}")

    for key in ("Omega", "beta", "lambda"):
        cfg["model"][key] = _number(cfg, "model", key)
    try:
        ModelParams(cfg["model"]["Omega"], cfg["model"]["beta"], cfg["model"]["lambda"])
    except ValueError as exc:
        key = "Omega" if "Omega" in str(exc) else "beta" if "beta" in str(exc) else "lambda"
        raise ConfigError(f"model.{key}", str(exc)) from None

    b = cfg["bath"]
    for key in ("scale", "exponent", "cutoff", "level", "lo", "hi", "omega0", "g"):
        b[key] = _number(cfg, "bath", key)
    try:
        make_density(b)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"bath ({b['family']})", str(exc)) from None

    d = cfg["discretization"]
    d["modes"] = _number(cfg, "discretization", "modes", int)
    if d["modes"] < 1:
        raise ConfigError("discretization.modes", "need at least one mode")
    if d["scheme"] not in ("midpoint", "gauss-legendre"):
        raise ConfigError("discretization.scheme", f"unsupported scheme {d['scheme']!r}")
    if d["window"] is not None:
        w = d["window"]
        if not (isinstance(w, list) and len(w) == 2 and all(isinstance(x, (int, float)) for x in w)
                and 0 <= w[0] < w[1]):
            raise ConfigError("discretization.window", f"expected [lo, hi] with 0 <= lo < hi, got {w!r}")
        d["window"] = [float(w[0]), float(w[1])]

    tr = cfg["truncation"]
    tr["max_excitations"] = _number(cfg, "truncation", "max_excitations", int)
    if tr["max_excitations"] < 1:
        raise ConfigError("truncation.max_excitations", "must be >= 1")
    tr["min_weight"] = _number(cfg, "truncation", "min_weight")
    if not 0 <= tr["min_weight"] <= 1:
        raise ConfigError("truncation.min_weight", "must lie in [0, 1]")

    tm = cfg["time"]
    tm["t_max"] = _number(cfg, "time", "t_max")
    tm["steps"] = _number(cfg, "time", "steps", int)
    if not tm["t_max"] > 0:
        raise ConfigError("time.t_max", "must be > 0")
    if tm["steps"] < 2:
        raise ConfigError("time.steps", "must be >= 2")

    try:
        parse_state(cfg["initial"]["state"])
    except ValueError as exc:
        raise ConfigError("initial.state", str(exc)) from None

    g = cfg["gkls"]
    g["d_min"] = _number(cfg, "gkls", "d_min")
    g["closure_d_floor"] = _number(cfg, "gkls", "closure_d_floor")
    cfg["thermo"]["weak_coupling_lambda"] = _number(cfg, "thermo", "weak_coupling_lambda")
    cfg["survival"]["nodes_per_panel"] = _number(cfg, "survival", "nodes_per_panel", int)

    if cfg["output"]["format"] not in ("csv", "json"):
        raise ConfigError("output.format", f"expected csv or json, got {cfg['output']['format']!r}")

    if cfg["pipeline"] == "survival":
        if not math.isinf(cfg["model"]["beta"]):
            raise ConfigError("model.beta", "the survival pipeline needs the zero-temperature reservoir (beta = \"vacuum\")")
        if cfg["initial"]["state"] != "excited":
            raise ConfigError("initial.state", "the survival pipeline starts from the excited state")
    return Scenario(cfg, source)


def load(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc}") from None
    return loads(text, str(path))


def loads(text: str, source: str = "<string>") -> Scenario:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<syntax>", str(exc)) from None
    return normalize(raw, source)


# -- shipped presets ------------------------------------------------------------

def preset_names() -> list[str]:
    files = resources.files("rwaqubit").joinpath("presets").iterdir()
    return sorted(p.name[:-5] for p in files if p.name.endswith(".toml"))


def preset_text(name: str) -> str:
    f = resources.files("rwaqubit").joinpath("presets", f"{name}.toml")
    if not f.is_file():
        raise ConfigError("--preset", f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return f.read_text()


def load_preset(name: str) -> Scenario:
    return loads(preset_text(name), f"preset:{name}")
