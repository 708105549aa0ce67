"""Run configuration: INI sections of flat keys, flag overrides, presets."""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field

from .model_functions import ModelFunctions, nonlinearity_from_spec

__all__ = ["ConfigError", "RunConfig", "SCHEMA", "DEFAULTS", "load_config", "build_model",
           "PRESETS", "format_value"]

PRESETS = ("theorem1", "theorem2", "theorem3")
COMMANDS = ("profile", "solve", "sweep", "rstar", "potential", "pointvortex", "validate")


class ConfigError(ValueError):
    pass


def _floats(n=None):
    def parse(text):
        if isinstance(text, (list, tuple)):
            vals = [float(v) for v in text]
        else:
            vals = [float(v) for v in str(text).replace(",", " ").split()]
        if n is not None and vals and len(vals) != n:
            raise ValueError(f"expected {n} numbers (or none), got {len(vals)}")
        return vals
    return parse


def _opt_str(text):
    return None if text in (None, "", "none") else str(text)


SCHEMA = {
    "model": {"preset": _opt_str, "f": str, "g": _opt_str, "p": float, "pg": float,
              "alpha": float, "delta": float, "cf": float, "cg": float},
    "physics": {"kappa": float, "speed": float, "lambda_cap": float},
    "solver": {"epsilon": float, "epsilons": _floats(), "grid_n": int, "cells_per_eps": float,
               "fixedpoint_tol": float, "mass_tol": float, "max_iter": int,
               "box": _floats(4), "center": _floats(2)},
    "potential": {"t": float},
    "pointvortex": {"radius": float, "dt": float, "duration": float},
    "validate": {"d": float},
    "run": {"out": str, "workers": int, "seed": int},
}

DEFAULTS = {
    "model": {"preset": None, "f": "power", "g": None, "p": 1.0, "pg": math.nan,
              "alpha": 1.0, "delta": 0.0, "cf": math.nan, "cg": math.nan},
    "physics": {"kappa": 1.0, "speed": 1.0 / (4.0 * math.pi), "lambda_cap": 10.0},
    "solver": {"epsilon": 0.04, "epsilons": [0.08, 0.057, 0.04, 0.028, 0.02], "grid_n": 0,
               "cells_per_eps": 6.0, "fixedpoint_tol": 1e-9, "mass_tol": 1e-8,
               "max_iter": 400, "box": [], "center": []},
    "potential": {"t": math.nan},
    "pointvortex": {"radius": math.nan, "dt": 1e-3, "duration": 1.0},
    "validate": {"d": 2.0},
    "run": {"out": "vortexpair-out", "workers": 1, "seed": 0},
}

# sections the loader skips (written by the manifest for provenance)
IGNORED_SECTIONS = ("manifest",)


def format_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return " ".join(format_value(x) for x in v)
    return str(v)


@dataclass
class RunConfig:
    command: str
    values: dict = field(default_factory=dict)

    def get(self, section: str, key: str):
        return self.values[section][key]

    @property
    def output_dir(self) -> str:
        return self.values["run"]["out"]

    @property
    def seed(self) -> int:
        return self.values["run"]["seed"]

    def flat(self) -> dict:
        return {f"{s}.{k}": v for s, kv in self.values.items() for k, v in kv.items()}

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        for s, kv in self.values.items():
            cp[s] = {k: format_value(v) for k, v in kv.items()}
        from io import StringIO
        buf = StringIO()
        cp.write(buf)
        return buf.getvalue()


def _parse(section, key, raw):
    try:
        return SCHEMA[section][key](raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {section}.{key}: {raw!r} ({exc})") from None


def load_config(command: str, path: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the INI file, then flag overrides ({'section.key': value})."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    values = {s: dict(kv) for s, kv in DEFAULTS.items()}
    if path:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        try:
            with open(path) as fh:
                cp.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        for section in cp.sections():
            if section in IGNORED_SECTIONS:
                continue
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}] in {path}")
            for key, raw in cp[section].items():
                if key not in SCHEMA[section]:
                    raise ConfigError(f"unknown key {section}.{key} in {path}")
                values[section][key] = _parse(section, key, raw)
    for dotted, raw in (overrides or {}).items():
        section, key = dotted.split(".", 1)
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"unknown key {dotted}")
        values[section][key] = _parse(section, key, raw)
    preset = values["model"]["preset"]
    if preset is not None and preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
    return RunConfig(command, values)


def _nl(family, p):
    return nonlinearity_from_spec(family, p if family in ("power", "pow") else None)


def build_model(cfg: RunConfig) -> ModelFunctions:
    """Model coefficients from the preset (if any) and explicit cf/cg, checked for consistency."""
    m = cfg.values["model"]
    p = m["p"]
    pg = p if math.isnan(m["pg"]) else m["pg"]
    preset = m["preset"]
    f = _nl(m["f"], p)
    g_family = m["g"]
    if preset == "theorem1":
        if g_family not in (None, m["f"]) or (not math.isnan(m["pg"]) and pg != p):
            raise ConfigError("theorem1 preset needs g = f")
        cf, cg, g = 1.0, m["alpha"], f
    elif preset == "theorem2":
        g = _nl(g_family or m["f"], pg)
        cf, cg = 1.0, m["delta"]
    elif preset == "theorem3":
        g = _nl(g_family or "power", pg)
        cf, cg = m["delta"], 1.0
    else:
        g = _nl(g_family or "zero", pg)
        cf = 1.0 if math.isnan(m["cf"]) else m["cf"]
        cg = 0.0 if math.isnan(m["cg"]) else m["cg"]
    if preset is not None:
        for name, want in (("cf", cf), ("cg", cg)):
            given = m[name]
            if not math.isnan(given) and given != want:
                raise ConfigError(f"{preset} preset fixes {name} = {want:g}, config says {given:g}")
    try:
        return ModelFunctions(f, g, cf, cg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
