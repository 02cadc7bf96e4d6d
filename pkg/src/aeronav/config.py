"""Run configuration: defaults, file loading, environment and flag overrides."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

ENV_PREFIX = "AERONAV_"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class NoiseConfig:
    p_detect: float = 0.9
    sigma_pos: float = 2.0
    fp_rate: float = 0.5
    attr_confusion: float = 0.05
    confidence_floor: float = 0.20

    def __post_init__(self):
        for name in ("p_detect", "attr_confusion", "confidence_floor"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1]")
        if self.sigma_pos < 0 or self.fp_rate < 0:
            raise ConfigError("sigma_pos and fp_rate must be non-negative")


@dataclass(frozen=True)
class RunConfig:
    reasoner: str = "scripted"  # scripted | external
    endpoint_url: str | None = None
    endpoint_timeout: float = 5.0
    endpoint_retries: int = 2
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    noiseless: bool = False
    gamma: float = 0.95
    sigma: float = 10.0
    rho: float = 0.8
    altitude: float = 50.0
    nav_threshold: float = 50.0
    coverage_threshold: float = 0.8
    max_trial: int = 3
    budget: int = 10
    search_budget: int = 6
    negate_camera_offset: bool = True
    ablate_scm: bool = False
    ablate_hsg: bool = False
    ablate_staging: bool = False
    seeds: tuple = (0,)
    output_dir: str = "out"

    def __post_init__(self):
        if self.reasoner not in ("scripted", "external"):
            raise ConfigError(f"reasoner must be 'scripted' or 'external', got {self.reasoner!r}")
        if self.reasoner == "external" and not self.endpoint_url:
            raise ConfigError("external reasoner requires an endpoint url")
        if not (0 < self.gamma < 1 and 0 < self.rho < 1 and self.sigma > 0):
            raise ConfigError("hyperparameters out of range")
        if not (0 <= self.coverage_threshold <= 1):
            raise ConfigError("coverage_threshold must be in [0, 1]")
        if self.budget < 1 or self.max_trial < 1 or self.search_budget < 1:
            raise ConfigError("budgets must be positive")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))

    def digest(self) -> str:
        doc = asdict(self)
        doc.pop("output_dir", None)  # where results land does not change them
        return hashlib.sha256(
            json.dumps(doc, sort_keys=True).encode()
        ).hexdigest()[:16]


_SCALAR_FIELDS = {
    f.name: f.type for f in fields(RunConfig) if f.name not in ("noise", "seeds")
}


def _coerce(name: str, raw: str):
    if name in ("endpoint_retries", "max_trial", "budget", "search_budget"):
        return int(raw)
    if name in ("endpoint_timeout", "gamma", "sigma", "rho", "altitude",
                "nav_threshold", "coverage_threshold"):
        return float(raw)
    if name in ("noiseless", "negate_camera_offset",
                "ablate_scm", "ablate_hsg", "ablate_staging"):
        return raw.lower() in ("1", "true", "yes", "on")
    return raw


def load_config(path=None, env=None, overrides=None) -> RunConfig:
    """Build a RunConfig with precedence flags > environment > file > defaults."""
    values: dict = {}
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
        for key, value in doc.items():
            if key == "noise":
                values["noise"] = NoiseConfig(**value)
            elif key == "seeds":
                values["seeds"] = tuple(value)
            elif key in _SCALAR_FIELDS:
                values[key] = value
            else:
                raise ConfigError(f"unknown config key {key!r}")

    env = os.environ if env is None else env
    for key in _SCALAR_FIELDS:
        env_key = ENV_PREFIX + key.upper()
        if env_key in env:
            values[key] = _coerce(key, env[env_key])
    if ENV_PREFIX + "SEEDS" in env:
        values["seeds"] = tuple(int(s) for s in env[ENV_PREFIX + "SEEDS"].split(","))

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "noise" and isinstance(value, dict):
            values["noise"] = NoiseConfig(**value)
        else:
            values[key] = value
    return RunConfig(**values)
