"""Exploitability of a learned strategy profile."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..sim import CrisisConfig
from .td3 import PolicySet, TrainConfig
from .train import evaluate, train


@dataclass
class NashConvResult:
    value: float
    gains: dict[str, float]
    base_returns: dict[str, float]


def _returns(policies: PolicySet, crisis: CrisisConfig, episodes: int, seed: int) -> dict[str, float]:
    traces = evaluate(policies, crisis, episodes, seed)
    out = {}
    for b in range(crisis.num_buyers):
        out[f"b{b}"] = float(np.mean([t.buyer_totals[b] for t in traces]))
    for s in range(crisis.num_sellers):
        out[f"s{s}"] = float(np.mean([t.seller_totals[s] for t in traces]))
    return out


def nashconv(policies: PolicySet, crisis: CrisisConfig, cfg: TrainConfig,
             rng: np.random.Generator, episodes: int | None = None,
             eval_episodes: int = 1) -> NashConvResult:
    """Sum over traders of the return gained by a learned unilateral deviation.

    For each trader a copy of the profile is made in which only that trader keeps
    learning; the others are frozen.  Returns are undiscounted and evaluated
    with mean actions under common random numbers, and negative gains count as
    zero.
    """
    episodes = cfg.nashconv_episodes if episodes is None else episodes
    seed = int(rng.integers(2**31))
    base = _returns(policies, crisis, eval_episodes, seed)
    gains = {}
    roles = [("buyer", b) for b in range(crisis.num_buyers)]
    roles += [("seller", s) for s in range(crisis.num_sellers)]
    for role, index in roles:
        deviant = policies.best_response_copy(role, index)
        train(crisis, cfg, rng, deviant, episodes)
        name = f"{role[0]}{index}"
        dev = _returns(deviant, crisis, eval_episodes, seed)[name]
        gains[name] = max(0.0, dev - base[name])
    return NashConvResult(float(sum(gains.values())), gains, base)
