"""Twin-delayed actor-critic updates for Gaussian actors."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .buffer import ReplayBuffer
from .mlp import Adam
from .networks import BuyerActor, Critic, SellerActor


@dataclass
class TrainConfig:
    actor_lr: float = 3e-4
    critic_lr: float = 1e-3
    actor_hidden: int = 32
    critic_hidden: int = 256
    batch_size: int = 512
    l2: float = 1e-2
    gamma: float = 0.99
    tau: float = 0.002
    actor_every: int = 3
    entropy: float = 3e-3
    episodes: int = 3000
    train_interval: int | None = None  # None: once per episode (every T markets)
    gradient_steps: int = 10
    min_buffer: int = 64
    buffer_capacity: int = 100_000
    reward_clip: float = 1.0
    std_floor: float = 1e-3
    nashconv_episodes: int = 100

    def __post_init__(self):
        for name in ("actor_hidden", "critic_hidden", "batch_size", "actor_every",
                     "gradient_steps", "min_buffer", "buffer_capacity"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("actor_lr", "critic_lr", "l2", "tau", "entropy", "reward_clip", "std_floor"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not 0 <= self.gamma <= 1:
            raise ValueError("gamma must be in [0, 1]")
        if self.episodes < 0 or self.nashconv_episodes < 0:
            raise ValueError("episode counts must be non-negative")


class Agent:
    def __init__(self, role: str, index: int, actor, cfg: TrainConfig):
        self.role, self.index = role, index
        self.actor = actor
        self.target = copy.deepcopy(actor)
        self.opt = Adam(actor.params(), cfg.actor_lr)

    @property
    def name(self) -> str:
        return f"{self.role[0]}{self.index}"


class CriticPair:
    def __init__(self, obs_dim: int, act_dim: int, cfg: TrainConfig, rng: np.random.Generator):
        self.q = [Critic(obs_dim, act_dim, cfg.critic_hidden, rng) for _ in range(2)]
        self.target = [copy.deepcopy(q) for q in self.q]
        self.opt = Adam(self.q[0].params() + self.q[1].params(), cfg.critic_lr)


@dataclass
class LearningUnit:
    """Agents trained against one critic pair from one replay buffer."""

    agents: list[Agent]
    critics: CriticPair
    buffer: ReplayBuffer
    active: bool = True
    updates: int = 0
    log: list = field(default_factory=list)


def _l2(params: list[np.ndarray], coef: float) -> tuple[float, list[np.ndarray]]:
    # weights only: arrays alternate W, b
    loss = 0.0
    grads = []
    for i, p in enumerate(params):
        if i % 2 == 0 and coef > 0:
            loss += coef * float(np.sum(p * p))
            grads.append(2.0 * coef * p)
        else:
            grads.append(np.zeros_like(p))
    return loss, grads


def polyak(target: list[np.ndarray], online: list[np.ndarray], tau: float) -> None:
    for t, o in zip(target, online):
        t *= 1.0 - tau
        t += tau * o


def sample_actions(mean: np.ndarray, std: np.ndarray, rng: np.random.Generator):
    eps = rng.standard_normal(mean.shape)
    return np.clip(mean + std * eps, 0.0, 1.0), eps


def td3_update(unit: LearningUnit, batch: dict[str, np.ndarray], cfg: TrainConfig,
               rng: np.random.Generator) -> dict[str, float]:
    """One critic step; every ``cfg.actor_every``-th call also actor and target steps."""
    obs, act, next_obs = batch["obs"], batch["act"], batch["next_obs"]
    rew = np.clip(batch["rew"], -cfg.reward_clip, cfg.reward_clip)
    done = batch["done"]
    actor_ids = batch["actor"]
    n = len(rew)
    by_index = {a.index: a for a in unit.agents}

    next_act = np.zeros_like(act)
    for idx in np.unique(actor_ids):
        rows = actor_ids == idx
        mean, std, _ = by_index[int(idx)].target.forward(next_obs[rows])
        next_act[rows], _ = sample_actions(mean, std, rng)
    q1t, _ = unit.critics.target[0].forward(next_obs, next_act)
    q2t, _ = unit.critics.target[1].forward(next_obs, next_act)
    y = rew + cfg.gamma * (1.0 - done) * np.minimum(q1t, q2t)

    grads = []
    info = {}
    for j, q in enumerate(unit.critics.q):
        pred, cache = q.forward(obs, act)
        err = pred - y
        g, _ = q.backward(cache, 2.0 * err / n)
        reg, g_reg = _l2(q.params(), cfg.l2)
        grads += [a + b for a, b in zip(g, g_reg)]
        info[f"critic{j + 1}_loss"] = float(np.mean(err ** 2)) + reg
    unit.critics.opt.step(grads)
    unit.updates += 1

    if unit.updates % cfg.actor_every == 0:
        for agent in unit.agents:
            info[f"actor_{agent.name}_loss"] = _actor_step(agent, unit.critics.q[0], obs, cfg, rng)
        for q, qt in zip(unit.critics.q, unit.critics.target):
            polyak(qt.params(), q.params(), cfg.tau)
        for agent in unit.agents:
            polyak(agent.target.params(), agent.actor.params(), cfg.tau)

    _check_finite(unit)
    return info


def _actor_step(agent: Agent, critic: Critic, obs: np.ndarray, cfg: TrainConfig,
                rng: np.random.Generator) -> float:
    n = len(obs)
    mean, std, cache = agent.actor.forward(obs)
    raw = mean + std * (eps := rng.standard_normal(mean.shape))
    a = np.clip(raw, 0.0, 1.0)
    q_sample, c_sample = critic.forward(obs, a)
    q_mean, _ = critic.forward(obs, np.clip(mean, 0.0, 1.0))
    # upgoing update: the mean only moves towards samples rated above the mean action;
    # the spread follows the critic on every sample so it can shrink at an optimum
    mask = (q_sample > q_mean).astype(float)
    _, dq_da = critic.backward(c_sample, -np.ones(n) / n)
    inside = ((raw > 0.0) & (raw < 1.0)).astype(float)
    da = dq_da * inside
    dmean = da * mask[:, None]
    dstd = da * eps - cfg.entropy / (n * std)
    g = agent.actor.backward(cache, dmean, dstd)
    reg, g_reg = _l2(agent.actor.params(), cfg.l2)
    agent.opt.step([a_ + b_ for a_, b_ in zip(g, g_reg)])
    entropy = float(np.mean(np.sum(np.log(std), axis=1)))
    return float(-np.mean(q_sample) - cfg.entropy * entropy + reg)


def _check_finite(unit: LearningUnit) -> None:
    for j, q in enumerate(unit.critics.q):
        if not q.net.is_finite():
            raise FloatingPointError(f"critic {j + 1} of unit {unit.agents[0].name} became non-finite")
    for agent in unit.agents:
        if not all(np.all(np.isfinite(p)) for p in agent.actor.params()):
            raise FloatingPointError(f"actor {agent.name} became non-finite")


class PolicySet:
    """All traders' actors, critics and replay buffers.

    Sellers keep separate actors but share one critic pair and one replay
    buffer; every buyer has its own critic pair and buffer.
    """

    def __init__(self, num_buyers: int, num_sellers: int, cfg: TrainConfig,
                 rng: np.random.Generator):
        self.num_buyers, self.num_sellers = num_buyers, num_sellers
        self.cfg = cfg
        self.seller_obs_dim = 2 * num_buyers + 1
        self.buyer_stage1_dim = 2 * num_sellers + 3
        self.buyer_others_dim = 2 * (num_buyers - 1)
        self.buyer_obs_dim = self.buyer_stage1_dim + self.buyer_others_dim
        self.sellers = [Agent("seller", s, SellerActor(self.seller_obs_dim, cfg.actor_hidden, rng,
                                                       cfg.std_floor), cfg)
                        for s in range(num_sellers)]
        self.buyers = [Agent("buyer", b, BuyerActor(self.buyer_stage1_dim, self.buyer_others_dim,
                                                    cfg.actor_hidden, rng, cfg.std_floor), cfg)
                       for b in range(num_buyers)]
        seller_unit = LearningUnit(
            self.sellers, CriticPair(self.seller_obs_dim, SellerActor.act_dim, cfg, rng),
            ReplayBuffer(cfg.buffer_capacity, self.seller_obs_dim, SellerActor.act_dim, shared=True))
        self.units = [seller_unit] + [
            LearningUnit([a], CriticPair(self.buyer_obs_dim, BuyerActor.act_dim, cfg, rng),
                         ReplayBuffer(cfg.buffer_capacity, self.buyer_obs_dim, BuyerActor.act_dim))
            for a in self.buyers]

    def unit_of(self, agent: Agent) -> LearningUnit:
        for u in self.units:
            if any(a is agent for a in u.agents):
                return u
        raise KeyError(agent.name)

    def agent(self, role: str, index: int) -> Agent:
        return (self.sellers if role == "seller" else self.buyers)[index]

    def all_agents(self) -> list[Agent]:
        return self.sellers + self.buyers

    def train_step(self, rng: np.random.Generator) -> list[dict[str, float]]:
        """``cfg.gradient_steps`` updates of every active unit with enough data."""
        logs = []
        for unit in self.units:
            if not unit.active or len(unit.buffer) < self.cfg.min_buffer:
                continue
            n = min(self.cfg.batch_size, len(unit.buffer))
            for _ in range(self.cfg.gradient_steps):
                logs.append(td3_update(unit, unit.buffer.sample(n, rng), self.cfg, rng))
        return logs

    def best_response_copy(self, role: str, index: int) -> "PolicySet":
        """Deep copy in which only ``(role, index)`` learns, from a fresh buffer.

        The learner starts from its current actor and a copy of its current
        critic pair; everyone else is frozen.
        """
        buffers = {id(u.buffer): u.buffer for u in self.units}
        memo = {k: None for k in buffers}  # buffers are not copied
        clone = copy.deepcopy(self, memo)
        focal = clone.agent(role, index)
        old_unit = clone.unit_of(focal)
        cfg = clone.cfg
        obs_dim = clone.seller_obs_dim if role == "seller" else clone.buyer_obs_dim
        act_dim = SellerActor.act_dim if role == "seller" else BuyerActor.act_dim
        critics = copy.deepcopy(old_unit.critics)
        critics.opt = Adam(critics.q[0].params() + critics.q[1].params(), cfg.critic_lr)
        unit = LearningUnit([focal], critics, ReplayBuffer(cfg.buffer_capacity, obs_dim, act_dim))
        old_unit.agents = [a for a in old_unit.agents if a is not focal]
        for u in clone.units:
            u.active = False
            u.buffer = None
        clone.units = [u for u in clone.units if u.agents] + [unit]
        return clone
