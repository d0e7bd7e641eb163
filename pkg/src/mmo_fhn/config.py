"""Flat ``key = value`` experiment configuration files."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, FhnError
from .params import DerivedParams, ModelParams, derive_params, params_from_scaled


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s: str) -> list:
    return [float(x) for x in s.replace(";", ",").split(",") if x.strip()]


def _opt_int(s: str):
    return None if s.strip().lower() in ("", "none") else int(s)


_KEYS = {
    # model, direct form
    "a": float, "b": float, "c": float, "eps": float, "sigma1": float, "sigma2": float,
    # model, scaled form (c = 0)
    "mu_t": float, "sigma_t": float, "sigma1_share": float,
    # chart
    "rho": float, "f_offset": float, "f_left": float, "z_top": float, "M": int,
    # integration
    "dt": float, "dt_original": float, "t_max": float, "record_every": int,
    "frame": str, "x0": float, "y0": float, "xi0": float, "z0": float,
    # spike trains
    "n_spikes": int, "n_chains": int, "max_saos": _opt_int, "kernel": _bool,
    "mu_t_list": _floats,
    # kernel
    "n_bins": int, "samples_per_bin": int, "n_boot": int, "t_max_once": float,
    # oracle
    "L": float, "z_lin": float, "H_list": _floats, "n_paths": int, "dt_linear": float,
    # run control
    "seed": int, "out": str, "threads": int,
}

_MODEL_DIRECT = ("a", "c", "sigma1", "sigma2", "b")
_MODEL_SCALED = ("mu_t", "sigma_t", "sigma1_share")


@dataclass
class ExperimentConfig:
    model: ModelParams
    values: dict = field(default_factory=dict)
    scaled_entry: bool = False

    def get(self, key, default=None):
        return self.values.get(key, default)

    @property
    def derived(self) -> DerivedParams:
        return derive_params(self.model)

    def chart_kwargs(self) -> dict:
        return {k: self.values[k] for k in ("rho", "f_offset", "f_left", "z_top", "M") if k in self.values}

    def with_mu_t(self, mu_t: float) -> "ExperimentConfig":
        if not self.scaled_entry:
            raise ConfigError("mu_t sweeps need the scaled parameterisation (mu_t, sigma_t, eps)")
        vals = dict(self.values, mu_t=mu_t)
        return ExperimentConfig(_scaled_model(vals), vals, True)


def _scaled_model(v: dict) -> ModelParams:
    mp = params_from_scaled(v["mu_t"], v["sigma_t"], v["eps"], v.get("sigma1_share", 0.5))
    d = derive_params(mp)
    if abs(d.mu_t - v["mu_t"]) > 1e-10 * max(1.0, abs(v["mu_t"])) or abs(d.sigma_t - v["sigma_t"]) > 1e-10 * max(1.0, v["sigma_t"]):
        raise ConfigError("scaled parameter inversion does not round-trip")
    return mp


def parse_config_text(text: str) -> ExperimentConfig:
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _KEYS[key](val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    return build_config(values)


def build_config(values: dict) -> ExperimentConfig:
    direct = [k for k in _MODEL_DIRECT if k in values]
    scaled = [k for k in _MODEL_SCALED if k in values]
    if "eps" not in values:
        raise ConfigError("eps is required")
    if direct and scaled:
        raise ConfigError(f"mixing direct ({', '.join(direct)}) and scaled ({', '.join(scaled)}) parameters")
    try:
        if scaled:
            if "mu_t" not in values or "sigma_t" not in values:
                raise ConfigError("scaled form needs both mu_t and sigma_t")
            return ExperimentConfig(_scaled_model(values), values, True)
        if "a" not in values:
            raise ConfigError("direct form needs a (and optionally b, c, sigma1, sigma2)")
        mp = ModelParams(a=values["a"], c=values.get("c", 0.0), eps=values["eps"],
                         sigma1=values.get("sigma1", 0.0), sigma2=values.get("sigma2", 0.0),
                         b=values.get("b", 1.0))
        return ExperimentConfig(mp, values, False)
    except ConfigError:
        raise
    except (ValueError, FhnError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config_text(text)


def check_positive(cfg: ExperimentConfig, key: str, default):
    v = cfg.get(key, default)
    if v is None or (isinstance(v, (int, float)) and (not math.isfinite(v) or v <= 0)):
        raise ConfigError(f"{key} must be positive")
    return v
