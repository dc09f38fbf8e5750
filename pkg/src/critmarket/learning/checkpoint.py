"""Saving and restoring actor weights."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .td3 import PolicySet, TrainConfig

FORMAT_VERSION = 1


def save_policies(policies: PolicySet, path: str | Path) -> None:
    arrays = {}
    for agent in policies.all_agents():
        for net_name, net in agent.actor.nets().items():
            for i, a in enumerate(net.arrays()):
                arrays[f"{agent.name}/{net_name}/{i}"] = a
    meta = {"version": FORMAT_VERSION, "num_buyers": policies.num_buyers,
            "num_sellers": policies.num_sellers, "actor_hidden": policies.cfg.actor_hidden}
    arrays["__meta__"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
    with open(path, "wb") as f:
        np.savez(f, **arrays)


def load_policies(path: str | Path, cfg: TrainConfig | None = None,
                  rng: np.random.Generator | None = None) -> PolicySet:
    """Actors from a checkpoint; critics and buffers start fresh."""
    with np.load(path) as data:
        meta = json.loads(bytes(data["__meta__"]).decode())
        if meta.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('version')!r}")
        cfg = cfg or TrainConfig()
        if cfg.actor_hidden != meta["actor_hidden"]:
            cfg = TrainConfig(**{**cfg.__dict__, "actor_hidden": meta["actor_hidden"]})
        policies = PolicySet(meta["num_buyers"], meta["num_sellers"], cfg,
                             rng or np.random.default_rng(0))
        for agent in policies.all_agents():
            for net_name, net in agent.actor.nets().items():
                for i, a in enumerate(net.arrays()):
                    a[...] = data[f"{agent.name}/{net_name}/{i}"]
            for t, o in zip(agent.target.params(), agent.actor.params()):
                t[...] = o
    return policies
