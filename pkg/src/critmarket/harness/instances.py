"""Random crisis instances: rich and poor buyers, identical sellers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..clearing import Mechanism
from ..sim import CrisisConfig, Fairness


@dataclass(frozen=True)
class InstanceSpec:
    num_buyers: int = 4
    num_sellers: int = 4
    rich_demand: tuple[float, float] = (1.0, 2.0)
    rich_earning: tuple[float, float] = (4.0, 6.0)
    poor_demand: tuple[float, float] = (4.0, 6.0)
    poor_earning: tuple[float, float] = (1.0, 2.0)
    rich_probability: float = 0.75
    fixed_roles: bool = True  # exactly one poor buyer, the last one
    mean_demand: float = 1.0
    mean_earning: float = 1 / 8
    price_cap: float = 1.0
    c1: float = -1 / 8
    c2: float = 1 / 2
    c3: float = 1.0
    horizon: int = 10
    gamma: float = 0.99

    def __post_init__(self):
        if self.num_buyers < 2:
            raise ValueError("need at least two buyers")
        if self.num_sellers < 1:
            raise ValueError("need at least one seller")
        for name in ("rich_demand", "rich_earning", "poor_demand", "poor_earning"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ValueError(f"{name} must be a positive range")
        if not 0 <= self.rich_probability <= 1:
            raise ValueError("rich_probability must be a probability")
        if self.mean_demand <= 0 or self.mean_earning <= 0:
            raise ValueError("normalization targets must be positive")


def _roles(spec: InstanceSpec, rng: np.random.Generator) -> np.ndarray:
    """Boolean mask of rich buyers."""
    if spec.fixed_roles:
        rich = np.ones(spec.num_buyers, dtype=bool)
        rich[-1] = False
        return rich
    return rng.random(spec.num_buyers) < spec.rich_probability


def generate_instance(spec: InstanceSpec, rng: np.random.Generator,
                      mechanism: Mechanism = Mechanism.GREEDY,
                      fairness: Fairness = Fairness.RIGHTS, k: int = 1) -> CrisisConfig:
    """Sample demands and earnings per role, then rescale to the target means."""
    while True:
        _, d, m = raw_draw(spec, rng)
        if d.sum() > 0 and m.sum() > 0:
            break
    d *= spec.mean_demand / d.mean()
    m *= spec.mean_earning / m.mean()
    return CrisisConfig(
        demands=d, buyer_earnings=m,
        seller_supply=np.full(spec.num_sellers, 1.0 / spec.num_sellers),
        horizon=spec.horizon, k=k, mechanism=mechanism, fairness=fairness,
        price_cap=spec.price_cap, c1=spec.c1, c2=spec.c2, c3=spec.c3, gamma=spec.gamma)


def raw_draw(spec: InstanceSpec, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rich mask and pre-normalization draws, consuming ``rng`` like :func:`generate_instance`."""
    rich = _roles(spec, rng)
    d = np.where(rich, rng.uniform(*spec.rich_demand, spec.num_buyers),
                 rng.uniform(*spec.poor_demand, spec.num_buyers))
    m = np.where(rich, rng.uniform(*spec.rich_earning, spec.num_buyers),
                 rng.uniform(*spec.poor_earning, spec.num_buyers))
    return rich, d, m
