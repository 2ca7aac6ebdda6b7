"""Experiment configuration: a flat key=value file with # comments.

The format is deliberately primitive so config files diff cleanly and can
be parsed from any language.  Loading then re-serializing a config yields
field-by-field identical values.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass

from .errors import ConfigError

__all__ = ["ExperimentConfig", "load_config", "save_config", "parse_kv_file"]

_TRANSITIONS = ("pure", "bps", "hyperspherical-exact", "hyperspherical-asym")
_EXPERIMENTS = ("gauss", "logit", "custom")


@dataclass
class ExperimentConfig:
    experiment: str = "gauss"
    p: int = 10
    data_path: str = ""
    prior_variance: float = 1e-3
    transition: str = "hyperspherical-exact"
    rate_bound_coeff: float = 5.0
    refresh_intensity: float = 0.2
    budget: int = 100_000
    batch_size: int = 10
    sgd_steps: int = 1000
    seed: int = 0
    out_dir: str = "out"
    plot: bool = False
    paper_scale: bool = False

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in _EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.transition not in _TRANSITIONS:
            raise ConfigError(f"unknown transition {self.transition!r}")
        if self.p < 1:
            raise ConfigError(f"dimension must be positive, got {self.p}")
        if self.budget < 1:
            raise ConfigError(f"budget must be positive, got {self.budget}")
        if self.rate_bound_coeff <= 0:
            raise ConfigError("rate_bound_coeff must be positive")
        if self.refresh_intensity < 0:
            raise ConfigError("refresh_intensity must be nonnegative")
        if self.prior_variance <= 0:
            raise ConfigError("prior_variance must be positive")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be positive")
        if self.sgd_steps < 1:
            raise ConfigError("sgd_steps must be positive")
        if self.data_path and not os.path.exists(self.data_path):
            raise ConfigError(f"data file does not exist: {self.data_path}")
        return self


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}


def _parse_value(name: str, raw: str):
    kind = _FIELD_TYPES[name]
    if kind == "bool":
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"{name}: cannot parse {raw!r} as a flag")
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{name}: cannot parse {raw!r} ({exc})") from exc
    return raw


def parse_kv_file(path) -> dict[str, str]:
    pairs: dict[str, str] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line.rstrip()!r}")
            key, value = stripped.split("=", 1)
            pairs[key.strip()] = value.strip()
    return pairs


def load_config(path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    cfg = dataclasses.replace(base) if base is not None else ExperimentConfig()
    for key, raw in parse_kv_file(path).items():
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{path}: unknown config key {key!r}")
        setattr(cfg, key, _parse_value(key, raw))
    return cfg.validate()


def save_config(cfg: ExperimentConfig, path) -> None:
    lines = []
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{f.name}={value}")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
