"""Run configuration read from an INI file.

Grammar (all keys optional; unknown sections or keys are errors)::

    [data]
    preset = executive            ; executive | academic
    study_first = 2017            ; study window, inclusive
    study_last = 2021
    estimation_first = 2010       ; window for transition estimates
    estimation_last = 2021
    sectors =                     ; comma list, empty = all

    [clusters]
    method = even                 ; even | jenks
    n_clusters = 6                ; integer or "auto"
    candidates = 3,4,5,6,7,8      ; used when n_clusters = auto
    threshold = -0.5
    correlation = spearman        ; spearman | kendall
    log_size = true               ; jenks on log sizes
    pooling = pooled              ; pooled | per_year

    [calibration]
    alpha_min = -1.5
    alpha_max = 1.5
    alpha_step = 0.06
    delta = 0.9
    tau = 0                       ; 0 = indicator proximity
    top_k = 500
    bootstrap_size = 500
    n_seeds = 10
    seed = 0
    denoise = true
    denoise_lambda = auto         ; or a number
    renormalize = true
    benchmark_nu = estimated      ; estimated | mu
    n_workers = 1

    [validate]
    tolerance = 0.12

The preset fills defaults first; explicit keys override it.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field

PRESETS = {
    "executive": {"tau": 0.0, "bootstrap_size": 500},
    "academic": {"tau": 1.0, "bootstrap_size": 200},
}

_SECTIONS = {
    "data": ("preset", "study_first", "study_last", "estimation_first", "estimation_last", "sectors"),
    "clusters": ("method", "n_clusters", "candidates", "threshold", "correlation", "log_size", "pooling"),
    "calibration": ("alpha_min", "alpha_max", "alpha_step", "delta", "tau", "top_k", "bootstrap_size",
                    "n_seeds", "seed", "denoise", "denoise_lambda", "renormalize", "benchmark_nu",
                    "n_workers"),
    "validate": ("tolerance",),
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    preset: str = "executive"
    study_first: int | None = None
    study_last: int | None = None
    estimation_first: int | None = None
    estimation_last: int | None = None
    sectors: tuple = ()
    method: str = "even"
    n_clusters: int | None = 6
    candidates: tuple = (3, 4, 5, 6, 7, 8)
    threshold: float = -0.5
    correlation: str = "spearman"
    log_size: bool = True
    pooling: str = "pooled"
    alpha_min: float = -1.5
    alpha_max: float = 1.5
    alpha_step: float = 0.06
    delta: float = 0.9
    tau: float = 0.0
    top_k: int = 500
    bootstrap_size: int = 500
    n_seeds: int = 10
    seed: int = 0
    denoise: bool = True
    denoise_lambda: float | None = None
    renormalize: bool = True
    benchmark_nu: str = "estimated"
    n_workers: int = 1
    tolerance: float = 0.12
    extra: dict = field(default_factory=dict)

    def validate(self) -> "RunConfig":
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}")
        if self.method not in ("even", "jenks"):
            raise ConfigError(f"unknown cluster method {self.method!r}")
        if self.correlation not in ("spearman", "kendall"):
            raise ConfigError(f"unknown correlation {self.correlation!r}")
        if self.pooling not in ("pooled", "per_year"):
            raise ConfigError(f"unknown pooling {self.pooling!r}")
        if self.benchmark_nu not in ("estimated", "mu"):
            raise ConfigError(f"unknown benchmark_nu {self.benchmark_nu!r}")
        if self.n_clusters is not None and self.n_clusters < 1:
            raise ConfigError("n_clusters must be positive")
        if self.alpha_step <= 0 or self.alpha_max < self.alpha_min:
            raise ConfigError("bad alpha grid")
        if not 0 <= self.delta <= 1:
            raise ConfigError("delta must lie in [0, 1]")
        if self.tau < 0:
            raise ConfigError("tau must be nonnegative")
        for name in ("top_k", "bootstrap_size", "n_seeds", "n_workers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.denoise_lambda is not None and self.denoise_lambda < 0:
            raise ConfigError("denoise_lambda must be nonnegative")
        return self

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("extra")
        d["sectors"] = list(self.sectors)
        d["candidates"] = list(self.candidates)
        return d


def preset_config(name: str = "executive") -> RunConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}")
    return RunConfig(preset=name, **PRESETS[name]).validate()


def _bool(text, key):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {text!r}")


def _convert(key, text, default_field):
    text = text.strip()
    try:
        if key == "sectors":
            return tuple(s.strip() for s in text.split(",") if s.strip())
        if key == "candidates":
            return tuple(int(s) for s in text.split(",") if s.strip())
        if key == "n_clusters":
            return None if text.lower() == "auto" else int(text)
        if key == "denoise_lambda":
            return None if text.lower() in ("", "auto") else float(text)
        if key in ("study_first", "study_last", "estimation_first", "estimation_last"):
            return None if text == "" else int(text)
        if isinstance(default_field, bool):
            return _bool(text, key)
        if isinstance(default_field, int):
            return int(text)
        if isinstance(default_field, float):
            return float(text)
        return text
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {text!r} ({exc})") from None


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    for sec in cp.sections():
        if sec not in _SECTIONS:
            raise ConfigError(f"unknown section [{sec}]")
        for key in cp[sec]:
            if key not in _SECTIONS[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]")
    preset = cp.get("data", "preset", fallback="executive").strip()
    cfg = preset_config(preset)
    defaults = RunConfig()
    for sec in cp.sections():
        for key, val in cp[sec].items():
            setattr(cfg, key, _convert(key, val, getattr(defaults, key)))
    return cfg.validate()


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())
