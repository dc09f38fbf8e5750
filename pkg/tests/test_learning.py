import copy

import numpy as np
import pytest

from critmarket.core import SellerOffer
from critmarket.harness.instances import InstanceSpec, generate_instance
from critmarket.learning import (Adam, BuyerActor, Critic, MlpParams, PolicySet, PolicyStrategy,
                                 ReplayBuffer, SellerActor, TrainConfig, load_policies, mlp_backward,
                                 mlp_forward, nashconv, save_policies, td3_update, train)
from critmarket.learning.td3 import CriticPair, LearningUnit, Agent, polyak
from critmarket.sim import CrisisConfig, run_crisis

H = 1e-5
FD_TOL = 1e-4


def _rel(a, n):
    a, n = np.ravel(a), np.ravel(n)
    denom = np.linalg.norm(a) + np.linalg.norm(n)
    return 0.0 if denom < 1e-10 else float(np.linalg.norm(a - n) / denom)


def fd_check(loss, params, analytic, rng, coords=12):
    """Worst relative error between analytic and central-difference gradients."""
    worst = 0.0
    for p, g in zip(params, analytic):
        idx = rng.choice(p.size, size=min(coords, p.size), replace=False)
        num = np.empty(len(idx))
        for j, i in enumerate(idx):
            flat = p.reshape(-1)
            old = flat[i]
            flat[i] = old + H
            up = loss()
            flat[i] = old - H
            down = loss()
            flat[i] = old
            num[j] = (up - down) / (2 * H)
        worst = max(worst, _rel(g.reshape(-1)[idx], num))
    return worst


def _perturb(params, rng, scale=0.5):
    for p in params:
        p += rng.normal(0, scale, p.shape)


def check_seller_actor(rng, hidden=32):
    actor = SellerActor(9, hidden, rng)
    _perturb(actor.params(), rng)
    obs = rng.normal(size=(5, 9))
    cm, cs = rng.normal(size=(5, 2)), rng.normal(size=(5, 2))

    def loss():
        mean, std, _ = actor.forward(obs)
        return float(np.sum(cm * mean + cs * std))

    _, _, cache = actor.forward(obs)
    return fd_check(loss, actor.params(), actor.backward(cache, cm, cs), rng)


def check_buyer_actor(rng, hidden=32):
    actor = BuyerActor(11, 6, hidden, rng)
    _perturb(actor.params(), rng)
    obs = rng.normal(size=(5, 17))
    cm, cs = rng.normal(size=(5, 6)), rng.normal(size=(5, 6))

    def loss():
        mean, std, _ = actor.forward(obs)
        return float(np.sum(cm * mean + cs * std))

    _, _, cache = actor.forward(obs)
    return fd_check(loss, actor.params(), actor.backward(cache, cm, cs), rng)


def check_critic(rng, obs_dim, act_dim, hidden=256):
    critic = Critic(obs_dim, act_dim, hidden, rng)
    _perturb(critic.params(), rng, 0.1)
    obs, act = rng.normal(size=(5, obs_dim)), rng.uniform(size=(5, act_dim))
    cq = rng.normal(size=5)

    def loss():
        return float(np.sum(cq * critic.forward(obs, act)[0]))

    _, cache = critic.forward(obs, act)
    grads, da = critic.backward(cache, cq)
    worst = fd_check(loss, critic.params(), grads, rng)
    return max(worst, fd_check(loss, [act], [da], rng))


ARCHITECTURES = {
    "seller_actor": check_seller_actor,
    "buyer_actor": check_buyer_actor,
    "seller_critic": lambda rng: check_critic(rng, 9, 2),
    "buyer_critic": lambda rng: check_critic(rng, 17, 6),
}


class TestGradients:
    @pytest.mark.parametrize("name", list(ARCHITECTURES))
    def test_finite_differences(self, name):
        rng = np.random.default_rng(sum(map(ord, name)))
        worst = max(ARCHITECTURES[name](rng) for _ in range(25))
        assert worst < FD_TOL

    @pytest.mark.parametrize("act", ["linear", "tanh", "relu", "sigmoid", "softplus"])
    def test_activations(self, act, rng):
        net = MlpParams.init([3, 4, 2], [act, "linear"], rng)
        x = rng.normal(size=(6, 3))
        up = rng.normal(size=(6, 2))
        grads, gx = mlp_backward(net, x, up)
        loss = lambda: float(np.sum(up * mlp_forward(net, x)))
        assert fd_check(loss, net.arrays(), grads.arrays(), rng, coords=20) < FD_TOL
        assert fd_check(loss, [x], [gx], rng, coords=18) < FD_TOL

    def test_shape_errors(self, rng):
        net = MlpParams.init([3, 2], ["linear"], rng)
        with pytest.raises(ValueError):
            mlp_forward(net, np.ones(4))
        with pytest.raises(ValueError):
            mlp_backward(net, np.ones((2, 3)), np.ones((2, 3)))
        with pytest.raises(ValueError):
            MlpParams.init([3, 2], ["swish"], rng)

    def test_stage_separation(self, rng):
        actor = BuyerActor(5, 4, 8, rng)
        obs = rng.normal(size=(3, 9))
        other = obs.copy()
        other[:, 5:] = rng.normal(size=(3, 4))
        m1, s1, _ = actor.forward(obs)
        m2, s2, _ = actor.forward(other)
        np.testing.assert_array_equal(m1[:, :2], m2[:, :2])
        np.testing.assert_array_equal(s1[:, :2], s2[:, :2])
        mean, std = actor.forward_stage1(obs[:, :5])
        np.testing.assert_allclose(mean, m1[:, :2])
        assert np.all(std >= 1e-3)


class TestOptim:
    def test_adam_minimizes_quadratic(self):
        x = np.array([3.0, -2.0])
        opt = Adam([x], 0.05)
        for _ in range(2000):
            opt.step([2 * x])
        np.testing.assert_allclose(x, 0, atol=1e-2)

    def test_adam_zero_lr_is_noop(self):
        x = np.array([1.0])
        Adam([x], 0.0).step([np.array([5.0])])
        assert x[0] == 1.0

    def test_polyak_moves_target(self, rng):
        online = [rng.normal(size=(3, 3))]
        target = [rng.normal(size=(3, 3))]
        before = np.linalg.norm(target[0] - online[0])
        polyak(target, online, 0.1)
        assert np.linalg.norm(target[0] - online[0]) == pytest.approx(0.9 * before)


class TestBuffer:
    def test_fifo_and_growth(self, rng):
        buf = ReplayBuffer(3000, 2, 1)
        for i in range(3500):
            buf.add([i, i], [0], float(i), [i, i], False)
        assert len(buf) == 3000
        assert buf.rew.min() == 500
        assert buf.oldest() == 500

    def test_sample(self, rng):
        buf = ReplayBuffer(10, 2, 1, shared=True)
        for i in range(5):
            buf.add([i, 0], [0.5], 1.0, [0, 0], i == 4, actor=i % 2)
        batch = buf.sample(4, rng)
        assert batch["obs"].shape == (4, 2) and set(batch["actor"]) <= {0, 1}
        with pytest.raises(ValueError):
            ReplayBuffer(10, 1, 1).sample(1, rng)
        with pytest.raises(ValueError):
            ReplayBuffer(0, 1, 1)


def small_crisis(**kw):
    spec = InstanceSpec(num_buyers=3, num_sellers=2, horizon=4, c1=-0.25)
    return generate_instance(spec, np.random.default_rng(0), **kw)


FAST = TrainConfig(critic_hidden=32, batch_size=32, gradient_steps=2, min_buffer=8)


class TestStrategy:
    def test_buffer_sharing(self, rng):
        crisis = small_crisis()
        pol = PolicySet(3, 2, FAST, rng)
        strat = PolicyStrategy(pol, rng, record=True)
        run_crisis(crisis, strat, rng, on_market=strat.end_market)
        assert len(pol.units[0].buffer) == 2 * crisis.horizon
        assert sorted(set(pol.units[0].buffer.actor[:len(pol.units[0].buffer)])) == [0, 1]
        for unit in pol.units[1:]:
            assert len(unit.buffer) == crisis.horizon
            assert unit.buffer.done[crisis.horizon - 1] == 1

    def test_actions_legal(self, rng):
        crisis = small_crisis()
        pol = PolicySet(3, 2, FAST, rng)
        for u in pol.units:
            for a in u.agents:
                _perturb(a.actor.params(), rng, 2.0)
        strat = PolicyStrategy(pol, rng)
        state = crisis.initial_state().copy(buyer_rights=np.array([0.2, 0.3, 0.1]))
        offers = strat.seller_offers(state, crisis)
        for s, o in enumerate(offers):
            assert 0 <= o.volume <= state.seller_good[s] and 0 <= o.price <= crisis.price_cap
        rights = strat.offer_rights(state, offers, crisis, 0)
        for b, (v, p) in enumerate(rights):
            assert 0 <= v <= state.buyer_rights[b] and 0 <= p <= crisis.price_cap
        for rv, rp, gv, gp in strat.bid(state, offers, rights, crisis, 0):
            assert 0 <= rp <= crisis.price_cap and 0 <= gp <= crisis.price_cap
            assert 0 <= gv <= sum(o.volume for o in offers) + 1e-12
            assert 0 <= rv <= sum(v for v, _ in rights) + 1e-12

    def test_deterministic_mode_uses_means(self, rng):
        crisis = small_crisis()
        pol = PolicySet(3, 2, FAST, rng)
        state = crisis.initial_state()
        a = PolicyStrategy(pol, np.random.default_rng(1), deterministic=True).seller_offers(state, crisis)
        b = PolicyStrategy(pol, np.random.default_rng(2), deterministic=True).seller_offers(state, crisis)
        assert a == b


class TestTraining:
    def test_zero_episodes(self, rng):
        pol = PolicySet(3, 2, FAST, rng)
        before = copy.deepcopy([a.actor.params() for a in pol.all_agents()])
        out = train(small_crisis(), FAST, rng, pol, episodes=0)
        assert out.policies is pol and out.metrics == []
        for b, a in zip(before, pol.all_agents()):
            for x, y in zip(b, a.actor.params()):
                np.testing.assert_array_equal(x, y)

    def test_reproducible(self):
        runs = [train(small_crisis(), FAST, np.random.default_rng(3), episodes=6) for _ in range(2)]
        assert [m.poa for m in runs[0].metrics] == [m.poa for m in runs[1].metrics]
        for x, y in zip(runs[0].policies.buyers[0].actor.params(),
                        runs[1].policies.buyers[0].actor.params()):
            np.testing.assert_array_equal(x, y)

    def test_prices_stay_in_range(self, rng):
        out = train(small_crisis(), FAST, rng, episodes=8)
        assert all(0 <= m.mean_ask_price <= 1 for m in out.metrics)
        assert all(0 <= m.poa <= 1 for m in out.metrics)
        assert all(u.updates > 0 for u in out.policies.units)

    def test_td3_solves_bandit(self):
        # one-step problem with reward peaked at action (0.3, 0.7)
        rng = np.random.default_rng(0)
        cfg = TrainConfig(critic_hidden=64, batch_size=128, critic_lr=3e-3, tau=0.05, l2=1e-4)
        agent = Agent("seller", 0, SellerActor(1, 16, rng), cfg)
        unit = LearningUnit([agent], CriticPair(1, 2, cfg, rng), ReplayBuffer(5000, 1, 2))
        target = np.array([0.3, 0.7])
        obs = np.ones((1, 1))
        for step in range(3000):
            mean, std, _ = agent.actor.forward(obs)
            a = np.clip(mean[0] + std[0] * rng.standard_normal(2), 0, 1)
            unit.buffer.add(obs[0], a, 1 - 4 * np.sum((a - target) ** 2), obs[0], True)
            if len(unit.buffer) >= 128:
                td3_update(unit, unit.buffer.sample(128, rng), cfg, rng)
        mean, _, _ = agent.actor.forward(obs)
        np.testing.assert_allclose(mean[0], target, atol=0.1)

    def test_critic_fits_constant_return(self):
        rng = np.random.default_rng(1)
        cfg = TrainConfig(critic_hidden=16, batch_size=64, critic_lr=1e-2, l2=0.0, actor_lr=0.0)
        agent = Agent("seller", 0, SellerActor(2, 4, rng), cfg)
        unit = LearningUnit([agent], CriticPair(2, 2, cfg, rng), ReplayBuffer(500, 2, 2))
        for _ in range(200):
            unit.buffer.add(rng.uniform(size=2), rng.uniform(size=2), 0.4, np.zeros(2), True)
        for _ in range(400):
            td3_update(unit, unit.buffer.sample(64, rng), cfg, rng)
        q, _ = unit.critics.q[0].forward(unit.buffer.obs[:200], unit.buffer.act[:200])
        np.testing.assert_allclose(q, 0.4, atol=0.02)


class TestBestResponse:
    def test_copy_isolates_learner(self, rng):
        pol = PolicySet(3, 2, FAST, rng)
        br = pol.best_response_copy("seller", 1)
        active = [u for u in br.units if u.active]
        assert len(active) == 1 and active[0].agents == [br.sellers[1]]
        crisis = small_crisis()
        frozen = copy.deepcopy(br.buyers[0].actor.params())
        train(crisis, FAST, rng, br, episodes=4)
        for x, y in zip(frozen, br.buyers[0].actor.params()):
            np.testing.assert_array_equal(x, y)
        # the incumbent profile is untouched
        assert all(u.updates == 0 for u in pol.units)

    def test_nashconv_zero_when_nothing_can_learn(self, rng):
        cfg = TrainConfig(critic_hidden=16, batch_size=16, actor_lr=0.0, critic_lr=0.0, min_buffer=4)
        pol = PolicySet(3, 2, cfg, rng)
        res = nashconv(pol, small_crisis(), cfg, rng, episodes=3)
        assert res.value == 0.0 and all(g == 0 for g in res.gains.values())

    def test_nashconv_gains_are_clipped(self, rng):
        pol = PolicySet(3, 2, FAST, rng)
        res = nashconv(pol, small_crisis(), FAST, rng, episodes=3)
        assert all(g >= 0 for g in res.gains.values())
        assert res.value == pytest.approx(sum(res.gains.values()))
        assert set(res.gains) == {"b0", "b1", "b2", "s0", "s1"}


class TestCheckpoint:
    def test_round_trip(self, rng, tmp_path):
        pol = PolicySet(3, 2, FAST, rng)
        _perturb(pol.buyers[2].actor.params(), rng)
        path = tmp_path / "p.npz"
        save_policies(pol, path)
        back = load_policies(path, FAST)
        for a, b in zip(pol.all_agents(), back.all_agents()):
            for x, y in zip(a.actor.params(), b.actor.params()):
                np.testing.assert_array_equal(x, y)

    def test_version_checked(self, rng, tmp_path):
        import json
        path = tmp_path / "bad.npz"
        meta = json.dumps({"version": 99}).encode()
        np.savez(path, __meta__=np.frombuffer(meta, dtype=np.uint8))
        with pytest.raises(ValueError):
            load_policies(path)
