"""YAML configuration mirroring the instance, training and plan settings."""

from __future__ import annotations

import dataclasses
from pathlib import Path
from typing import Any

import yaml

from ..learning import TrainConfig
from .experiment import FAIRNESS_MODES, Cell, ExperimentPlan
from .instances import InstanceSpec

PLAN_DEFAULTS = {
    "mechanisms": ["greedy"],
    "fairness": ["free", "rights-k1", "rights-k2"],
    "seeds": [0],
    "episodes": 300,
    "sizes": None,         # trader counts for a scaling study; None keeps the instance size
    "nashconv_at": [],
    "eval_episodes": 1,
}


class ConfigError(ValueError):
    pass


def _build(cls, raw: dict[str, Any] | None, section: str):
    raw = dict(raw or {})
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - names
    if unknown:
        raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
    for key, val in raw.items():
        if isinstance(val, list):
            raw[key] = tuple(val)
    try:
        return cls(**raw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"[{section}] {e}") from e


@dataclasses.dataclass
class Config:
    instance: InstanceSpec
    train: TrainConfig
    plan: dict[str, Any]

    def cells(self) -> list[Cell]:
        p = self.plan
        instances = [self.instance]
        if p["sizes"]:
            instances = [dataclasses.replace(self.instance, num_buyers=n, num_sellers=n,
                                             fixed_roles=False) for n in p["sizes"]]
        return [Cell(m, f, s, p["episodes"], inst, tuple(p["nashconv_at"]))
                for inst in instances for m in p["mechanisms"] for f in p["fairness"]
                for s in p["seeds"]]

    def experiment_plan(self, master_seed: int) -> ExperimentPlan:
        return ExperimentPlan(self.cells(), self.train, master_seed, self.plan["eval_episodes"])


def load_config(path: str | Path | None = None) -> Config:
    raw: dict[str, Any] = {}
    if path is not None:
        try:
            raw = yaml.safe_load(Path(path).read_text()) or {}
        except (OSError, yaml.YAMLError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        if not isinstance(raw, dict):
            raise ConfigError("config must be a mapping")
    unknown = set(raw) - {"instance", "train", "plan"}
    if unknown:
        raise ConfigError(f"unknown sections: {sorted(unknown)}")
    plan = dict(PLAN_DEFAULTS)
    extra = set(raw.get("plan") or {}) - set(plan)
    if extra:
        raise ConfigError(f"unknown keys in [plan]: {sorted(extra)}")
    plan.update(raw.get("plan") or {})
    for mode in plan["fairness"]:
        if mode not in FAIRNESS_MODES:
            raise ConfigError(f"unknown fairness mode {mode!r}")
    return Config(_build(InstanceSpec, raw.get("instance"), "instance"),
                  _build(TrainConfig, raw.get("train"), "train"), plan)
