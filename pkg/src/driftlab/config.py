"""Experiment configuration: a TOML file, overridable from the command line.

Example::

    scenario = "fixed_prior"        # fixed_prior | scale_hier | alpha_hier
    out = "runs/fixed"
    seed_base = 0

    [truth]
    beta = 1.0
    norm = 1.0
    profile = "power_decay"
    K = 256

    [simulation]
    T_ladder = [500, 2000, 8000, 32000]
    seeds = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10]
    dt = 0.001

    [prior]
    alpha = 1.0
    L = 1.0

    [inference]
    K = "auto"
    grid_size = 32
    ball_M = 3.0
    ball_samples = 1000
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCENARIOS = ("fixed_prior", "scale_hier", "alpha_hier")

# TOML table -> {key in table: field name}
_SECTIONS = {
    "truth": {"beta": "truth_beta", "norm": "truth_norm", "profile": "truth_profile",
              "K": "truth_K", "seed": "truth_seed"},
    "simulation": {"T_ladder": "T_ladder", "seeds": "seeds", "dt": "dt", "bins": "bins"},
    "prior": {"alpha": "prior_alpha", "L": "prior_L"},
    "inference": {"K": "K_policy", "K_cap": "K_cap", "grid_size": "grid_size",
                  "alpha_lo": "alpha_lo", "ball_M": "ball_M", "ball_samples": "ball_samples"},
    "theory": {"small_ball": "small_ball", "small_ball_samples": "small_ball_samples",
               "rkhs_beta": "rkhs_beta", "rkhs_alpha": "rkhs_alpha", "rkhs_L": "rkhs_L",
               "rkhs_eps": "rkhs_eps", "normalizer_T": "normalizer_T"},
}
# not part of the reproducibility hash
_UNHASHED = {"out", "workers"}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    scenario: str = "fixed_prior"
    out: str = "runs/default"
    seed_base: int = 0
    workers: int = 1

    truth_beta: float = 1.0
    truth_norm: float = 1.0
    truth_profile: str = "power_decay"
    truth_K: int = 256
    truth_seed: int = 0

    T_ladder: list = field(default_factory=lambda: [500.0, 2000.0, 8000.0, 32000.0])
    seeds: list = field(default_factory=lambda: list(range(1, 11)))
    dt: float = 1e-3
    bins: int = 256

    prior_alpha: float = 1.0
    prior_L: float = 1.0

    K_policy: object = "auto"
    K_cap: int = 2000
    grid_size: int = 32
    alpha_lo: float = 0.01
    ball_M: float = 3.0
    ball_samples: int = 1000

    small_ball: dict = field(default_factory=lambda: {
        "0.5": [0.5, 0.35, 0.25, 0.18],
        "1.0": [0.1, 0.07, 0.05, 0.035],
    })
    small_ball_samples: int = 100_000
    rkhs_beta: list = field(default_factory=lambda: [0.5, 1.0, 1.5])
    rkhs_alpha: list = field(default_factory=lambda: [0.5, 1.0, 2.0])
    rkhs_L: list = field(default_factory=lambda: [0.5, 2.0])
    rkhs_eps: list = field(default_factory=lambda: [0.2, 0.1, 0.05, 0.02])
    normalizer_T: list = field(default_factory=lambda: [1e2, 1e3, 1e4, 1e5, 1e6])

    def validate(self) -> "ExperimentConfig":
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        Ts = [float(t) for t in self.T_ladder]
        if not Ts or any(b <= a for a, b in zip(Ts, Ts[1:])):
            raise ConfigError("T_ladder must be non-empty and strictly increasing")
        if len(set(self.seeds)) != len(self.seeds) or not self.seeds:
            raise ConfigError("seeds must be non-empty and distinct")
        if any(int(s) < 0 for s in self.seeds) or int(self.seed_base) < 0:
            raise ConfigError("seeds must be unsigned integers")
        if not (0 < self.dt <= min(Ts) / 100):
            raise ConfigError("dt must satisfy 0 < dt <= min(T)/100")
        if self.K_policy != "auto" and not (isinstance(self.K_policy, int) and self.K_policy >= 1):
            raise ConfigError("inference.K must be 'auto' or a positive integer")
        if self.grid_size < 8:
            raise ConfigError("grid_size must be at least 8")
        if self.workers < 1:
            raise ConfigError("workers must be positive")
        if self.scenario == "alpha_hier" and min(Ts) <= 2.718281828459045:
            raise ConfigError("alpha_hier needs every T > e")
        self.T_ladder = Ts
        self.seeds = [int(s) for s in self.seeds]
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        d = {k: v for k, v in self.to_dict().items() if k not in _UNHASHED}
        blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def load_config(path=None, **overrides) -> ExperimentConfig:
    """Read a TOML config (optional) and apply non-None keyword overrides."""
    values = {}
    if path is not None:
        with open(path, "rb") as fh:
            try:
                raw = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
        names = {f.name for f in dataclasses.fields(ExperimentConfig)}
        for key, val in raw.items():
            if key in _SECTIONS:
                if not isinstance(val, dict):
                    raise ConfigError(f"[{key}] must be a table")
                for sub, v in val.items():
                    if sub not in _SECTIONS[key]:
                        raise ConfigError(f"unknown key {key}.{sub}")
                    values[_SECTIONS[key][sub]] = v
            elif key in names:
                values[key] = val
            else:
                raise ConfigError(f"unknown key {key!r}")
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        cfg = ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()
