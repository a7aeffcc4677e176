"""JSON run configuration: schema validation and object builders."""

from __future__ import annotations

import json
import os
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .model import ConfigError, Occupation
from .synthgen import SynthConfig, economy_from_dict

SEED_ENV = "TASKMARKET_SEED"


def load_schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("config.schema.json").read_text("utf-8"))


def _key_path(parts) -> str:
    return ".".join(str(p) for p in parts) or "<root>"


def _describe(err: jsonschema.ValidationError) -> str:
    path = list(err.absolute_path)
    if err.validator == "additionalProperties" and isinstance(err.instance, dict):
        known = set(err.schema.get("properties", {}))
        extra = sorted(k for k in err.instance if k not in known)
        return "; ".join(f"unknown key {_key_path(path + [k])}" for k in extra)
    if err.validator == "required":
        return f"{_key_path(path)}: {err.message}"
    return f"{_key_path(path)}: {err.message}"


def validate_config(data: Any) -> dict:
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(data), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    if errors:
        raise ConfigError("; ".join(_describe(e) for e in errors))
    return data


def load_config(path: str | os.PathLike | None) -> dict:
    """Parse and validate a config file; ``None`` means an empty config."""
    if path is None:
        return {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return validate_config(data)


def resolve_seed(flag: int | None, cfg: dict, default: int = 0) -> int:
    """Flag first, then the environment variable, then the config, then ``default``."""
    if flag is not None:
        return flag
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip():
        try:
            value = int(env.strip())
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}") from None
        if value < 0:
            raise ConfigError(f"{SEED_ENV} must be nonnegative")
        return value
    return int(cfg.get("seed", default))


def build_economy(cfg: dict):
    if "economy" not in cfg:
        raise ConfigError("economy: section is required")
    return economy_from_dict(cfg["economy"])


def sweep_thetas(section: dict) -> np.ndarray:
    has_list = "thetas" in section
    has_range = any(k in section for k in ("min", "max", "count"))
    if has_list and has_range:
        raise ConfigError("sweep: give either thetas or min/max/count, not both")
    if has_list:
        return np.asarray(section["thetas"], dtype=float)
    if not all(k in section for k in ("min", "max", "count")):
        raise ConfigError("sweep.thetas: required (or sweep.min, sweep.max and sweep.count)")
    lo, hi, n = float(section["min"]), float(section["max"]), int(section["count"])
    if hi < lo:
        raise ConfigError("sweep.max must not be below sweep.min")
    return np.linspace(lo, hi, n)


def build_synth(cfg: dict, seed: int) -> SynthConfig:
    return SynthConfig(**{**cfg.get("synth", {}), "seed": seed})


def crosswalk_from_config(section: dict) -> dict[Occupation, str] | None:
    cw = section.get("crosswalk")
    if cw is None:
        return None
    return {Occupation.from_label(k): v for k, v in cw.items()}
