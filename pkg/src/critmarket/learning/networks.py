"""Actor and critic networks.

Actors output a Gaussian per action dimension: the mean is sigmoid-squashed into
[0, 1] and the standard deviation is a softplus plus a small floor.  The buyer
actor predicts its Right offer from the first hidden layer alone; that layer is
then concatenated with the other buyers' Right offers to predict the bids.
"""

from __future__ import annotations

import numpy as np

from .mlp import MlpParams, _sigmoid, _softplus, mlp_backward, mlp_forward

STD_FLOOR = 1e-3


def gaussian_head(z: np.ndarray, std_floor: float = STD_FLOOR):
    d = z.shape[-1] // 2
    mean = _sigmoid(z[..., :d])
    std = _softplus(z[..., d:]) + std_floor
    return mean, std


def gaussian_head_backward(z: np.ndarray, mean: np.ndarray, dmean: np.ndarray,
                           dstd: np.ndarray) -> np.ndarray:
    d = z.shape[-1] // 2
    return np.concatenate([dmean * mean * (1.0 - mean), dstd * _sigmoid(z[..., d:])], axis=-1)


class SellerActor:
    """``(buyer money, buyer good, own good) -> (volume fraction, price fraction)``."""

    act_dim = 2

    def __init__(self, obs_dim: int, hidden: int, rng: np.random.Generator, std_floor=STD_FLOOR):
        self.obs_dim = obs_dim
        self.std_floor = std_floor
        self.net = MlpParams.init([obs_dim, hidden, hidden, 2 * self.act_dim],
                                  ["tanh", "tanh", "linear"], rng)

    def params(self) -> list[np.ndarray]:
        return self.net.arrays()

    def nets(self) -> dict[str, MlpParams]:
        return {"net": self.net}

    def forward(self, obs: np.ndarray):
        z, cache = mlp_forward(self.net, obs, return_cache=True)
        mean, std = gaussian_head(z, self.std_floor)
        return mean, std, (obs, z, mean, cache)

    def backward(self, cache, dmean: np.ndarray, dstd: np.ndarray) -> list[np.ndarray]:
        obs, z, mean, net_cache = cache
        dz = gaussian_head_backward(z, mean, dmean, dstd)
        grads, _ = mlp_backward(self.net, obs, dz, net_cache)
        return grads.arrays()


class BuyerActor:
    """Two-stage buyer policy.

    Stage 1 sees ``(offer volumes, offer prices, money, good, rights)`` and
    emits the Right offer ``(volume, price)``.  Stage 2 additionally sees the
    other buyers' Right offers and emits ``(right volume, right price,
    good volume, good price)`` bids.  Full action order is the six-tuple.
    """

    act_dim = 6

    def __init__(self, stage1_dim: int, others_dim: int, hidden: int, rng: np.random.Generator,
                 std_floor=STD_FLOOR):
        self.stage1_dim = stage1_dim
        self.others_dim = others_dim
        self.obs_dim = stage1_dim + others_dim
        self.std_floor = std_floor
        self.trunk = MlpParams.init([stage1_dim, hidden], ["tanh"], rng)
        self.head1 = MlpParams.init([hidden, 4], ["linear"], rng)
        self.stage2 = MlpParams.init([hidden + others_dim, hidden, 8], ["tanh", "linear"], rng)

    def params(self) -> list[np.ndarray]:
        return self.trunk.arrays() + self.head1.arrays() + self.stage2.arrays()

    def nets(self) -> dict[str, MlpParams]:
        return {"trunk": self.trunk, "head1": self.head1, "stage2": self.stage2}

    def forward_stage1(self, obs1: np.ndarray):
        h1 = mlp_forward(self.trunk, obs1)
        return gaussian_head(mlp_forward(self.head1, h1), self.std_floor)

    def forward(self, obs: np.ndarray):
        obs = np.atleast_2d(obs)
        obs1, others = obs[:, :self.stage1_dim], obs[:, self.stage1_dim:]
        h1, c_trunk = mlp_forward(self.trunk, obs1, return_cache=True)
        z1, c_head = mlp_forward(self.head1, h1, return_cache=True)
        x2 = np.concatenate([h1, others], axis=1)
        z2, c_stage2 = mlp_forward(self.stage2, x2, return_cache=True)
        m1, s1 = gaussian_head(z1, self.std_floor)
        m2, s2 = gaussian_head(z2, self.std_floor)
        mean = np.concatenate([m1, m2], axis=1)
        std = np.concatenate([s1, s2], axis=1)
        return mean, std, (obs1, x2, h1, z1, z2, m1, m2, c_trunk, c_head, c_stage2)

    def backward(self, cache, dmean: np.ndarray, dstd: np.ndarray) -> list[np.ndarray]:
        obs1, x2, h1, z1, z2, m1, m2, c_trunk, c_head, c_stage2 = cache
        dz1 = gaussian_head_backward(z1, m1, dmean[:, :2], dstd[:, :2])
        dz2 = gaussian_head_backward(z2, m2, dmean[:, 2:], dstd[:, 2:])
        g_head, dh1_a = mlp_backward(self.head1, h1, dz1, c_head)
        g_stage2, dx2 = mlp_backward(self.stage2, x2, dz2, c_stage2)
        dh1 = dh1_a + dx2[:, :h1.shape[1]]
        g_trunk, _ = mlp_backward(self.trunk, obs1, dh1, c_trunk)
        return g_trunk.arrays() + g_head.arrays() + g_stage2.arrays()


class Critic:
    """``Q(observation, action)`` with one wide hidden layer."""

    def __init__(self, obs_dim: int, act_dim: int, hidden: int, rng: np.random.Generator):
        self.obs_dim, self.act_dim = obs_dim, act_dim
        self.net = MlpParams.init([obs_dim + act_dim, hidden, 1], ["tanh", "linear"], rng)

    def params(self) -> list[np.ndarray]:
        return self.net.arrays()

    def nets(self) -> dict[str, MlpParams]:
        return {"net": self.net}

    def forward(self, obs: np.ndarray, act: np.ndarray):
        x = np.concatenate([np.atleast_2d(obs), np.atleast_2d(act)], axis=1)
        q, cache = mlp_forward(self.net, x, return_cache=True)
        return q[:, 0], (x, cache)

    def backward(self, cache, dq: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
        """Parameter gradients and the gradient with respect to the action."""
        x, net_cache = cache
        grads, gx = mlp_backward(self.net, x, dq[:, None], net_cache)
        return grads.arrays(), gx[:, self.obs_dim:]
