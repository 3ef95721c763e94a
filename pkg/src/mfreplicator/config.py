"""Experiment configuration files (YAML, ``schema_version: 1``).

Example::

    schema_version: 1
    name: ps1_uic
    model:
      A: [[0.5, 1.0], [1.0, 0.5]]
      sigma: 1.0
      delta: 0.05
    run:
      N: 10000
      T: 100
      h: 0.01
      init_law: uic
      seed: 2024
      snapshot_stride: 10
    analyses:
      mean_tracking: {t_min: 30, tolerance: 0.02}
      ad_test: {times: [30, 100], B: 1000}

``model`` may instead name a ``preset`` (``ps1`` or ``ps2``); explicit keys
override the preset.  Unknown keys are rejected with the offending field
and line number.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
import yaml

from .ensemble import LIC, UIC, BetaInit
from .errors import ConfigError
from .presets import PRESETS
from .sde import SCHEMES, IntegratorConfig
from .simplex import MeanSkew, ModelParams

SCHEMA_VERSION = 1
BUNDLED = ("ps1_uic", "ps1_lic", "ps2_uic", "ps2_lic")


# --------------------------------------------------------- schema primitives

def _int(lo=None):
    def check(v):
        if isinstance(v, bool) or not isinstance(v, int):
            raise TypeError("expected an integer")
        if lo is not None and v < lo:
            raise ValueError(f"must be >= {lo}")
        return v
    return check


def _float(lo=None, hi=None, strict_lo=False):
    def check(v):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise TypeError("expected a number")
        v = float(v)
        if not np.isfinite(v):
            raise ValueError("must be finite")
        if lo is not None and (v <= lo if strict_lo else v < lo):
            raise ValueError(f"must be {'>' if strict_lo else '>='} {lo}")
        if hi is not None and v > hi:
            raise ValueError(f"must be <= {hi}")
        return v
    return check


def _choice(*options):
    def check(v):
        if v not in options:
            raise ValueError(f"must be one of {list(options)}")
        return v
    return check


def _list(item, min_len=1):
    def check(v):
        if not isinstance(v, list) or len(v) < min_len:
            raise TypeError(f"expected a list of at least {min_len} entries")
        return [item(x) for x in v]
    return check


def _matrix(v):
    if not isinstance(v, list) or not v or not all(isinstance(r, list) for r in v):
        raise TypeError("expected a square matrix (list of rows)")
    rows = [[_float()(x) for x in r] for r in v]
    if any(len(r) != len(rows) for r in rows):
        raise ValueError("matrix must be square")
    return rows


def _init_law(v):
    if isinstance(v, str):
        return _choice("uic", "lic")(v)
    if isinstance(v, dict) and len(v) == 1:
        (k, args), = v.items()
        if k == "lic" and isinstance(args, dict) and set(args) <= {"lo", "hi"}:
            return {"lic": {a: _float(0, 1)(x) for a, x in args.items()}}
        if k == "beta" and isinstance(args, dict) and set(args) == {"a", "b"}:
            return {"beta": {a: _float(0, strict_lo=True)(x) for a, x in args.items()}}
    raise ValueError("init_law must be 'uic', 'lic', {lic: {lo, hi}} or {beta: {a, b}}")


MODEL = {
    "preset": (_choice(*PRESETS), None),
    "A": (_matrix, None),
    "sigma": (_float(0), None),
    "delta": (_float(0), None),
    "interaction": (_choice("mean_skew"), "mean_skew"),
}

RUN = {
    "N": (_int(1), 10000),
    "T": (_float(0, strict_lo=True), 100.0),
    "h": (_float(0, strict_lo=True), 0.01),
    "scheme": (_choice(*SCHEMES), "direct"),
    "floor": (_float(0, 1e-6, strict_lo=True), 1e-12),
    "init_law": (_init_law, "uic"),
    "seed": (_int(0), 0),
    "snapshot_stride": (_int(1), 10),
    "histogram_every": (_float(0, strict_lo=True), 10.0),
    "workers": (_int(1), 1),
}

ANALYSES = {
    "mean_tracking": {
        "t_min": (_float(0), 30.0),
        "tolerance": (_float(0, strict_lo=True), 0.02),
    },
    "ad_test": {
        "times": (_list(_float(0), 2), [30.0, 100.0]),
        "levels": (_list(_float(0, 1)), [0.90, 0.95, 0.99]),
        "decision_level": (_float(0, 1), 0.99),
        "B": (_int(100), 1000),
        "min_nonrejection": (_float(0, 1), 0.60),
    },
    "tn_test": {
        "times": (_list(_float(0, strict_lo=True)), [40.0, 50.0]),
        "n_tracked": (_int(8), 1000),
        "N": (_int(1), 500),
        "B": (_int(1000), 5000),
        "levels": (_list(_float(0, 1)), [0.90, 0.95, 0.99]),
        "decision_level": (_float(0, 1), 0.90),
    },
    "poc": {
        "N_list": (_list(_int(1), 2), [100, 400, 1600]),
        "M": (_int(2), 50),
        "T": (_float(0, strict_lo=True), 10.0),
        "N_ref": (_int(1), 20000),
        "slope_range": (_list(_float(), 2), [-1.3, -0.7]),
    },
    "persistence": {
        "eps_list": (_list(_float(0, 1, strict_lo=True)), [0.001, 0.01, 0.1]),
        "t_min": (_float(0), 30.0),
        "r": (_float(0, strict_lo=True), 1.0),
        "cap": (_float(1, strict_lo=True), 1e6),
        "relative_tolerance": (_float(0, strict_lo=True), 0.5),
    },
}

TOP = {"schema_version", "name", "model", "run", "analyses"}


# ---------------------------------------------------------------- line table

def _lines(node, path=(), table=None):
    """Map key paths to 1-based source lines."""
    table = {} if table is None else table
    table[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = k.value
            table[path + (key,)] = k.start_mark.line + 1
            _lines(v, path + (key,), table)
            table[path + (key,)] = k.start_mark.line + 1
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _lines(v, path + (i,), table)
    return table


def _line(table, path):
    while path and path not in table:
        path = path[:-1]
    return table.get(path)


# -------------------------------------------------------------------- config

@dataclass
class ExperimentConfig:
    name: str
    model: dict
    run: dict
    analyses: dict
    source: str = field(default="", repr=False)

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.model["A"], self.model["sigma"], self.model["delta"],
                           MeanSkew())

    @property
    def integrator(self) -> IntegratorConfig:
        return IntegratorConfig(h=self.run["h"], scheme=self.run["scheme"],
                                floor=self.run["floor"], seed=self.run["seed"])

    @property
    def init_law(self):
        law = self.run["init_law"]
        if law == "uic":
            return UIC()
        if law == "lic":
            return LIC()
        if "lic" in law:
            return LIC(**law["lic"])
        return BetaInit(**law["beta"])

    def with_seed(self, seed: int) -> "ExperimentConfig":
        cfg = copy.deepcopy(self)
        cfg.run["seed"] = int(seed)
        return cfg

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "name": self.name,
                "model": copy.deepcopy(self.model), "run": copy.deepcopy(self.run),
                "analyses": copy.deepcopy(self.analyses)}

    def echo(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True, default_flow_style=None)


def _section(raw, schema, path, table):
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("expected a mapping", ".".join(path), _line(table, path))
    out = {}
    for key, value in raw.items():
        kp = path + (key,)
        if key not in schema:
            raise ConfigError(f"unknown key {key!r}", ".".join(map(str, kp)),
                              _line(table, kp))
        try:
            out[key] = schema[key][0](value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), ".".join(map(str, kp)), _line(table, kp)) from None
    for key, (_, default) in schema.items():
        if key not in out and default is not None:
            out[key] = copy.deepcopy(default)
    return out


def parse_config(text: str) -> ExperimentConfig:
    try:
        node = yaml.compose(text)
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {exc}", None,
                          mark.line + 1 if mark else None) from None
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a mapping", None, 1)
    table = _lines(node)
    for key in raw:
        if key not in TOP:
            raise ConfigError(f"unknown key {key!r}", str(key), _line(table, (key,)))
    if raw.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}", "schema_version",
                          _line(table, ("schema_version",)))
    name = raw.get("name", "experiment")
    if not isinstance(name, str):
        raise ConfigError("name must be a string", "name", _line(table, ("name",)))

    model = _section(raw.get("model"), MODEL, ("model",), table)
    if "preset" in model:
        base = PRESETS[model["preset"]]
        model.setdefault("A", base.payoff.tolist())
        model.setdefault("sigma", base.sigma)
        model.setdefault("delta", base.delta)
    for key in ("A", "sigma", "delta"):
        if key not in model:
            raise ConfigError(f"missing required key {key!r}", f"model.{key}",
                              _line(table, ("model",)))
    try:
        ModelParams(model["A"], model["sigma"], model["delta"], MeanSkew())
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc), "model", _line(table, ("model",))) from None

    run = _section(raw.get("run"), RUN, ("run",), table)
    if run["h"] > run["T"]:
        raise ConfigError("h must not exceed T", "run.h", _line(table, ("run", "h")))

    analyses_raw = raw.get("analyses") or {}
    if not isinstance(analyses_raw, dict):
        raise ConfigError("analyses must be a mapping", "analyses",
                          _line(table, ("analyses",)))
    analyses = {}
    for key, body in analyses_raw.items():
        if key not in ANALYSES:
            raise ConfigError(f"unknown analysis {key!r}", f"analyses.{key}",
                              _line(table, ("analyses", key)))
        analyses[key] = _section(body, ANALYSES[key], ("analyses", key), table)
    if "poc" in analyses and analyses["poc"]["N_ref"] < 10 * max(analyses["poc"]["N_list"]):
        raise ConfigError("N_ref must be at least 10 * max(N_list)", "analyses.poc.N_ref",
                          _line(table, ("analyses", "poc")))
    return ExperimentConfig(name, model, run, analyses, text)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", None, None) from None
    return parse_config(text)


def bundled_config_text(name: str) -> str:
    if name not in BUNDLED:
        raise ConfigError(f"no bundled config {name!r}; choose from {list(BUNDLED)}")
    return resources.files("mfreplicator").joinpath("configs", f"{name}.yaml").read_text()


def resolve_config(ref: str) -> ExperimentConfig:
    """A path, or the name of a bundled config."""
    if ref in BUNDLED:
        return parse_config(bundled_config_text(ref))
    return load_config(ref)


__all__ = ["ExperimentConfig", "parse_config", "load_config", "resolve_config",
           "bundled_config_text", "BUNDLED", "SCHEMA_VERSION"]
