"""INI experiment configuration.

Grammar: ``configparser`` INI with the sections below; every key is
optional and falls back to the listed default.  Keys not listed here are
rejected.  Lists are comma separated.

    [experiment]  name
    [model]       beta theta alpha b d
    [policy]      kind (linear | linear_tanh | zero) c1 c2
    [run]         horizon steps n_ladder replications base_seed workers
                  check_times grid_step out
    [tolerances]  see ``DEFAULT_TOLERANCES``
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from .model import ModelParams, ParamError, PolicySpec

EXPERIMENTS = ("lln", "clt", "moment-bound", "longrun", "fou-verify",
               "baseline-no-control", "sampler-selftest", "fluid", "constants")

DEFAULT_TOLERANCES = {
    "ci_sigmas": 3.0,
    "lln_slope_lo": -0.8,
    "lln_slope_hi": -0.3,
    "clt_rel": 0.20,
    "longrun_rel": 0.02,
    "ks_pvalue": 0.01,
    "exponent_tol": 0.05,
}

_SCHEMA = {
    "experiment": {"name": str},
    "model": {"beta": float, "theta": float, "alpha": float, "b": float, "d": int},
    "policy": {"kind": str, "c1": float, "c2": float},
    "run": {"horizon": float, "steps": int, "n_ladder": "ints", "replications": int,
            "base_seed": int, "workers": int, "check_times": "floats", "grid_step": float,
            "out": str},
    "tolerances": {k: float for k in DEFAULT_TOLERANCES},
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    params: ModelParams
    policy: PolicySpec
    horizon: float | None = None
    steps: int = 4096
    n_ladder: tuple[int, ...] = ()
    replications: int | None = None
    base_seed: int = 20240601
    workers: int = 1
    check_times: tuple[float, ...] = ()
    grid_step: float | None = None
    out: str = "out"
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))

    def tol(self, key: str) -> float:
        return self.tolerances[key]


def _convert(kind, raw: str, where: str):
    try:
        if kind == "ints":
            return tuple(int(v) for v in raw.split(",") if v.strip())
        if kind == "floats":
            return tuple(float(v) for v in raw.split(",") if v.strip())
        return kind(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse {raw!r}: {exc}") from None


def parse_config(text: str, source: str = "<string>", experiment: str | None = None) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    values: dict[str, dict] = {}
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key, raw in cp.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{source}: unknown key '{key}' in [{section}]")
            values.setdefault(section, {})[key] = _convert(_SCHEMA[section][key], raw, f"{source}: [{section}] {key}")
    exp = values.get("experiment", {}).get("name")
    if experiment is not None:
        if exp is not None and exp != experiment:
            raise ConfigError(f"{source}: config names experiment '{exp}' but '{experiment}' was requested")
        exp = experiment
    if exp is None:
        raise ConfigError(f"{source}: [experiment] name is required")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"{source}: unknown experiment '{exp}' (choose from {', '.join(EXPERIMENTS)})")
    model = {"beta": 2.5, "theta": 1.0, "alpha": 2.0, "d": 1}
    model.update(values.get("model", {}))
    model.setdefault("b", 1.0 / (model["theta"] * (model["beta"] - 2.0)) if 2 < model["beta"] < 3 else 2.0)
    try:
        params = ModelParams(model["beta"], model["theta"], model["alpha"], model["b"], model["d"], 1)
    except ParamError as exc:
        raise ConfigError(f"{source}: [model] {exc.field}: {exc}") from None
    pol = {"kind": "linear", "c1": 1.0, "c2": 0.0}
    pol.update(values.get("policy", {}))
    try:
        if pol["kind"] == "zero":
            policy = PolicySpec.zero()
        else:
            policy = PolicySpec(pol["kind"], pol["c1"], pol["c2"])
    except ParamError as exc:
        raise ConfigError(f"{source}: [policy] {exc}") from None
    run = values.get("run", {})
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(values.get("tolerances", {}))
    cfg = ExperimentConfig(exp, params, policy, tolerances=tol, **run)
    ladder = cfg.n_ladder
    if any(n < 1 for n in ladder) or any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise ConfigError(f"{source}: [run] n_ladder must be strictly increasing positive integers")
    if cfg.horizon is not None and cfg.horizon <= 0:
        raise ConfigError(f"{source}: [run] horizon must be positive")
    if cfg.replications is not None and cfg.replications < 2:
        raise ConfigError(f"{source}: [run] replications must be >= 2")
    if cfg.workers < 1:
        raise ConfigError(f"{source}: [run] workers must be >= 1")
    if cfg.grid_step is not None and cfg.grid_step <= 0:
        raise ConfigError(f"{source}: [run] grid_step must be positive")
    for n in ladder:
        params.with_n(n)
    return cfg


def load_config(path, experiment: str | None = None) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path), experiment)
