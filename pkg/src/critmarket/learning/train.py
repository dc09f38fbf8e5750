"""Equilibrium learning loop and the policy-driven strategy adapter."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np

from ..core import SellerOffer
from ..sim import (CrisisConfig, Fairness, MarketOutcome, buyer_observation, run_crisis,
                   seller_observation)
from .td3 import PolicySet, TrainConfig, sample_actions


class PolicyStrategy:
    """Drives the simulator with a :class:`PolicySet` and records transitions.

    Network outputs in [0, 1] are mapped to legal declarations: a seller offers
    a fraction of its Good at a fraction of the price cap; a buyer offers a
    fraction of its Rights, and bids for fractions of the Good and Right volume
    currently on offer, all prices being fractions of the cap.

    Only the first buyers' stage round of a Market is recorded; the reward of a
    transition is the trader's utility from that Market.
    """

    def __init__(self, policies: PolicySet, rng: np.random.Generator,
                 deterministic: bool = False, record: bool = False):
        self.policies = policies
        self.rng = rng
        self.deterministic = deterministic
        self.record = record
        self._pending: dict[tuple[str, int], tuple[np.ndarray, np.ndarray, float | None]] = {}
        self._current: dict[tuple[str, int], tuple[np.ndarray, np.ndarray]] = {}
        self._stage1: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    def _act(self, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
        if self.deterministic:
            return np.clip(mean, 0.0, 1.0)
        return sample_actions(mean, std, self.rng)[0]

    def _observe(self, key, obs) -> None:
        """Complete the previous transition of ``key`` with its next observation."""
        if not self.record or key not in self._pending:
            return
        prev_obs, prev_act, rew = self._pending.pop(key)
        self._push(key, prev_obs, prev_act, rew, obs, False)

    def _push(self, key, obs, act, rew, next_obs, done) -> None:
        role, index = key
        agent = self.policies.agent(role, index)
        unit = self.policies.unit_of(agent)
        if unit.active and unit.buffer is not None:
            unit.buffer.add(obs, act, rew, next_obs, done, actor=index)

    def seller_offers(self, state, config: CrisisConfig):
        offers = []
        for agent in self.policies.sellers:
            s = agent.index
            obs = seller_observation(state, s)
            self._observe(("seller", s), obs)
            mean, std, _ = agent.actor.forward(obs[None, :])
            a = self._act(mean[0], std[0])
            self._current[("seller", s)] = (obs, a)
            offers.append(SellerOffer(float(a[0] * state.seller_good[s]),
                                      float(a[1] * config.price_cap)))
        return offers

    def offer_rights(self, state, offers, config: CrisisConfig, round_index: int):
        out = []
        for agent in self.policies.buyers:
            b = agent.index
            obs1 = buyer_observation(state, b, offers, fairness=config.fairness)
            h = agent.actor.forward_stage1(obs1[None, :])
            a = self._act(h[0][0], h[1][0])
            self._stage1[b] = (obs1, a)
            if config.fairness is Fairness.FREE_MARKET:
                out.append((0.0, 0.0))
            else:
                out.append((float(a[0] * state.buyer_rights[b]), float(a[1] * config.price_cap)))
        return out

    def bid(self, state, offers, right_offers, config: CrisisConfig, round_index: int):
        total_good = sum(o.volume for o in offers)
        bids = []
        for agent in self.policies.buyers:
            b = agent.index
            obs = buyer_observation(state, b, offers, right_offers, config.fairness)
            mean, std, _ = agent.actor.forward(obs[None, :])
            a = self._act(mean[0], std[0])
            a[:2] = self._stage1[b][1]
            if round_index == 0:
                self._observe(("buyer", b), obs)
                self._current[("buyer", b)] = (obs, a.copy())
            total_right = sum(v for x, (v, _) in enumerate(right_offers) if x != b)
            cap = config.price_cap
            if config.fairness is Fairness.FREE_MARKET:
                a[:4] = 0.0
            bids.append((float(a[2] * total_right), float(a[3] * cap),
                         float(a[4] * total_good), float(a[5] * cap)))
        return bids

    def end_market(self, outcome: MarketOutcome) -> None:
        if not self.record:
            return
        for (role, index), (obs, act) in self._current.items():
            u = outcome.seller_utilities if role == "seller" else outcome.buyer_utilities
            rew = float(u[index])
            if outcome.terminal:
                self._push((role, index), obs, act, rew, np.zeros_like(obs), True)
            else:
                self._pending[(role, index)] = (obs, act, rew)
        self._current = {}


@dataclass
class EpisodeMetrics:
    episode: int
    poa: float
    mean_ask_price: float
    cleared_volume: float
    buyer_returns: np.ndarray
    seller_returns: np.ndarray


@dataclass
class TrainResult:
    policies: PolicySet
    metrics: list[EpisodeMetrics] = field(default_factory=list)


def _episode_metrics(ep: int, trace) -> EpisodeMetrics:
    prices = [o.price for out in trace.outcomes for o in out.seller_offers]
    return EpisodeMetrics(ep, trace.poa, float(np.mean(prices)),
                          float(sum(o.cleared_volume for o in trace.outcomes)),
                          trace.buyer_totals, trace.seller_totals)


def train(crisis: CrisisConfig, cfg: TrainConfig, rng: np.random.Generator,
          policies: PolicySet | None = None, episodes: int | None = None) -> TrainResult:
    """Learn a strategy profile by self-play.

    Each episode is one Crisis with stochastic actions.  After every
    ``train_interval`` Markets (default: the horizon) each active learning unit
    takes ``gradient_steps`` TD3 updates.
    """
    if policies is None:
        policies = PolicySet(crisis.num_buyers, crisis.num_sellers, cfg, rng)
    episodes = cfg.episodes if episodes is None else episodes
    interval = cfg.train_interval or crisis.horizon
    result = TrainResult(policies)
    step = 0

    for ep in range(episodes):
        strategy = PolicyStrategy(policies, rng, deterministic=False, record=True)

        def on_market(outcome: MarketOutcome):
            nonlocal step
            strategy.end_market(outcome)
            step += 1
            if step % interval == 0:
                policies.train_step(rng)

        trace = run_crisis(crisis, strategy, rng, on_market=on_market)
        result.metrics.append(_episode_metrics(ep, trace))
    return result


def evaluate(policies: PolicySet, crisis: CrisisConfig, episodes: int = 1, seed: int = 0):
    """Crisis traces under mean actions; the mechanism's randomness is seeded by ``seed``."""
    traces = []
    for i in range(episodes):
        rng = np.random.default_rng([seed, i])
        traces.append(run_crisis(crisis, PolicyStrategy(policies, rng, deterministic=True), rng))
    return traces


CURVE_COLUMNS = ("episode", "trader", "return", "poa", "mean_ask_price")


def write_curve_csv(metrics: list[EpisodeMetrics], out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CURVE_COLUMNS)
    for m in metrics:
        rows = [(f"b{b}", r) for b, r in enumerate(m.buyer_returns)]
        rows += [(f"s{s}", r) for s, r in enumerate(m.seller_returns)]
        for trader, ret in rows:
            w.writerow([m.episode, trader, repr(round(float(ret), 12)),
                        repr(round(m.poa, 12)), repr(round(m.mean_ask_price, 12))])
