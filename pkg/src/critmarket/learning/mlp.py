"""Small fully connected networks with hand-written backpropagation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _softplus(z):
    return np.logaddexp(0.0, z)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


_FORWARD = {
    "linear": lambda z: z,
    "tanh": np.tanh,
    "relu": lambda z: np.maximum(z, 0.0),
    "sigmoid": _sigmoid,
    "softplus": _softplus,
}

# derivative expressed through pre-activation z and output y
_DERIV = {
    "linear": lambda z, y: np.ones_like(z),
    "tanh": lambda z, y: 1.0 - y * y,
    "relu": lambda z, y: (z > 0).astype(z.dtype),
    "sigmoid": lambda z, y: y * (1.0 - y),
    "softplus": lambda z, y: _sigmoid(z),
}


@dataclass
class MlpParams:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activations: list[str]

    def __post_init__(self):
        if not (len(self.weights) == len(self.biases) == len(self.activations)):
            raise ValueError("weights, biases and activations must have equal length")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ValueError(f"layer {i}: bad shapes {w.shape}, {b.shape}")
            if i and self.weights[i - 1].shape[1] != w.shape[0]:
                raise ValueError(f"layer {i}: input size does not chain")
        for a in self.activations:
            if a not in _FORWARD:
                raise ValueError(f"unknown activation {a!r}")

    @classmethod
    def init(cls, sizes: list[int], activations: list[str], rng: np.random.Generator) -> "MlpParams":
        """Glorot-uniform weights, zero biases."""
        ws, bs = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            lim = np.sqrt(6.0 / (fan_in + fan_out))
            ws.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
            bs.append(np.zeros(fan_out))
        return cls(ws, bs, list(activations))

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[1]

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                         list(self.activations))

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())


def mlp_forward(params: MlpParams, x: np.ndarray, return_cache: bool = False):
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    h = x[None, :] if squeeze else x
    if h.shape[1] != params.in_dim:
        raise ValueError(f"expected input width {params.in_dim}, got {h.shape[1]}")
    cache = [h]
    for w, b, act in zip(params.weights, params.biases, params.activations):
        z = h @ w + b
        h = _FORWARD[act](z)
        cache += [z, h]
    out = h[0] if squeeze else h
    return (out, cache) if return_cache else out


def mlp_backward(params: MlpParams, x: np.ndarray, upstream: np.ndarray, cache=None
                 ) -> tuple[MlpParams, np.ndarray]:
    """Gradients of ``sum(upstream * mlp_forward(params, x))``.

    Returns the parameter gradients (same layout as ``params``) and the
    gradient with respect to ``x``.
    """
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    if cache is None:
        _, cache = mlp_forward(params, x, return_cache=True)
    g = np.asarray(upstream, dtype=float)
    g = g[None, :] if g.ndim == 1 else g
    if g.shape != (cache[-1].shape[0], params.out_dim):
        raise ValueError(f"upstream gradient has shape {g.shape}")
    n = len(params.weights)
    gws, gbs = [None] * n, [None] * n
    for i in reversed(range(n)):
        h_in, z, y = cache[2 * i], cache[2 * i + 1], cache[2 * i + 2]
        gz = g * _DERIV[params.activations[i]](z, y)
        gws[i] = h_in.T @ gz
        gbs[i] = gz.sum(axis=0)
        g = gz @ params.weights[i].T
    grad_in = g[0] if squeeze else g
    return MlpParams(gws, gbs, list(params.activations)), grad_in


class Adam:
    """Adam over a fixed list of parameter arrays, updated in place."""

    def __init__(self, params: list[np.ndarray], lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        if self.lr == 0.0:
            return
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
