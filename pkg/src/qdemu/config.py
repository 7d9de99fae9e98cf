"""Declarative run configuration: YAML document, strict keys, one flag per leaf."""
from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import yaml

from .curriculum import BARRIER_HB, BARRIER_WB, FREE_E0, FREE_S0, FREE_X0, WindowConfig
from .models import ModelSpec
from .rollout import RolloutConfig
from .sim import SimGrid
from .training import TrainConfig

SNAPSHOT_NAME = "resolved_config.yaml"


class ConfigError(ValueError):
    """Unknown key, wrong type or inconsistent value in a run configuration."""


@dataclass(frozen=True)
class DataConfig:
    regime: str = "barrier"  # free | barrier | both
    x0: tuple = FREE_X0
    s0: tuple = FREE_S0
    e0: tuple = FREE_E0
    barrier_heights: tuple = BARRIER_HB
    barrier_width: float = BARRIER_WB
    subset: int = 0  # 0 keeps every configuration
    subset_seed: int = 0
    storage: str = "lazy"  # lazy: frames + window index; materialized: every window written out

    def __post_init__(self):
        if self.storage not in ("lazy", "materialized"):
            raise ConfigError(f"data.storage must be lazy or materialized, got {self.storage!r}")
        if self.regime not in ("free", "barrier", "both"):
            raise ConfigError(f"data.regime must be free, barrier or both, got {self.regime!r}")
        if self.subset < 0:
            raise ConfigError("data.subset must be >= 0")


@dataclass(frozen=True)
class ModelConfig:
    kind: str = "gru"
    K: int = 69
    reset_after: bool = False

    def spec(self, window: WindowConfig) -> ModelSpec:
        return ModelSpec(self.kind, self.K, window.W, window.H, window.C, self.reset_after)


@dataclass(frozen=True)
class SuiteConfig:
    name: str = "standard"  # standard | free | potential | rect | non_gaussian
    seed: int = 2022

    def __post_init__(self):
        if self.name not in ("standard", "free", "potential", "rect", "non_gaussian"):
            raise ConfigError(f"unknown suite {self.name!r}")


SECTIONS = {
    "sim": SimGrid,
    "data": DataConfig,
    "window": WindowConfig,
    "model": ModelConfig,
    "train": TrainConfig,
    "rollout": RolloutConfig,
    "suite": SuiteConfig,
}


@dataclass(frozen=True)
class RunConfig:
    sim: SimGrid = SimGrid()
    method: str = "spectral"
    data: DataConfig = DataConfig()
    window: WindowConfig = WindowConfig()
    model: ModelConfig = ModelConfig()
    train: TrainConfig = TrainConfig()
    rollout: RolloutConfig = RolloutConfig()
    suite: SuiteConfig = SuiteConfig()
    output: str = "runs/default"
    seed: int = 0
    workers: int = 0  # 0 means every available core

    @property
    def model_spec(self) -> ModelSpec:
        return self.model.spec(self.window)

    @property
    def n_workers(self) -> int:
        if self.workers:
            return self.workers
        return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)

    def to_dict(self) -> dict:
        return _plain(asdict(self))

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)

    def hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]

    def snapshot(self, directory) -> Path:
        """Write the fully resolved configuration beside a run's outputs."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        path = d / SNAPSHOT_NAME
        path.write_text(self.dump())
        return path


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def leaf_keys() -> dict[str, type]:
    """Dotted name -> default value for every configurable leaf."""
    out = {}
    for f in fields(RunConfig):
        if f.name in SECTIONS:
            for g in fields(SECTIONS[f.name]):
                out[f"{f.name}.{g.name}"] = getattr(SECTIONS[f.name](), g.name)
        else:
            out[f.name] = getattr(RunConfig(), f.name)
    return out


def _coerce(key: str, value, default):
    if value is None:
        if default is None:
            return None
        raise ConfigError(f"{key}: null not allowed")
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false", "1", "0", "yes", "no"):
            return value.lower() in ("true", "1", "yes")
        raise ConfigError(f"{key}: expected a boolean, got {value!r}")
    try:
        if isinstance(default, int):
            if isinstance(value, float) and not value.is_integer():
                raise ConfigError(f"{key}: expected an integer, got {value!r}")
            return int(value)
        if isinstance(default, float):
            return float(value)
        if isinstance(default, tuple):
            if isinstance(value, str):
                value = yaml.safe_load(value)
            if not isinstance(value, (list, tuple)):
                value = [value]
            return tuple(float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: cannot convert {value!r}: {exc}") from None
    return str(value)


def from_mapping(doc: dict | None, overrides: dict | None = None) -> RunConfig:
    """Build a RunConfig from a nested mapping plus dotted-key overrides.

    Unknown keys at any level raise :class:`ConfigError`; overrides win.
    """
    doc = copy.deepcopy(doc or {})
    if not isinstance(doc, dict):
        raise ConfigError("configuration document must be a mapping")
    defaults = leaf_keys()
    flat: dict = {}
    for key, val in doc.items():
        if key in SECTIONS:
            if not isinstance(val, dict):
                raise ConfigError(f"section {key!r} must be a mapping")
            for sub, v in val.items():
                flat[f"{key}.{sub}"] = v
        else:
            flat[key] = val
    flat.update(overrides or {})
    if "seed" in flat:
        # the master seed feeds every stream not set explicitly
        for key in ("window.seed", "train.seed", "data.subset_seed"):
            flat.setdefault(key, flat["seed"])
    unknown = sorted(set(flat) - set(defaults))
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    top, sections = {}, {name: {} for name in SECTIONS}
    for key, val in flat.items():
        v = _coerce(key, val, defaults[key])
        if "." in key:
            sec, sub = key.split(".", 1)
            sections[sec][sub] = v
        else:
            top[key] = v
    try:
        built = {name: replace(cls(), **sections[name]) for name, cls in SECTIONS.items()}
        cfg = RunConfig(**built, **top)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if cfg.method not in ("spectral", "tridiagonal"):
        raise ConfigError(f"method must be spectral or tridiagonal, got {cfg.method!r}")
    if cfg.rollout.seed_steps != cfg.window.H:
        cfg = replace(cfg, rollout=replace(cfg.rollout, seed_steps=cfg.window.H))
    return cfg


def load(path=None, overrides: dict | None = None) -> RunConfig:
    doc = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        doc = yaml.safe_load(p.read_text()) or {}
    return from_mapping(doc, overrides)
