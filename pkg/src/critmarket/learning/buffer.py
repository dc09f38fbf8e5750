from __future__ import annotations

import numpy as np


class ReplayBuffer:
    """FIFO ring buffer of ``(obs, action, reward, next_obs, done, actor)`` transitions.

    ``actor`` identifies which actor produced the transition, so a buffer can be
    shared by several agents (the sellers share one).  Storage grows on demand
    up to ``capacity``.
    """

    def __init__(self, capacity: int, obs_dim: int, act_dim: int, shared: bool = False):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.obs_dim, self.act_dim = obs_dim, act_dim
        self.shared = shared
        self._size = 0
        self._next = 0
        self._alloc(min(capacity, 1024))

    def _alloc(self, n: int) -> None:
        old = getattr(self, "obs", None)
        new = {
            "obs": np.zeros((n, self.obs_dim)),
            "act": np.zeros((n, self.act_dim)),
            "rew": np.zeros(n),
            "next_obs": np.zeros((n, self.obs_dim)),
            "done": np.zeros(n),
            "actor": np.zeros(n, dtype=int),
        }
        if old is not None:
            for k, arr in new.items():
                arr[:self._size] = getattr(self, k)[:self._size]
        for k, arr in new.items():
            setattr(self, k, arr)

    def __len__(self) -> int:
        return self._size

    def add(self, obs, act, rew: float, next_obs, done: bool, actor: int = 0) -> None:
        if self._size < self.capacity and self._size == len(self.rew):
            self._alloc(min(self.capacity, 2 * len(self.rew)))
        i = self._next
        self.obs[i] = obs
        self.act[i] = act
        self.rew[i] = rew
        self.next_obs[i] = next_obs
        self.done[i] = float(done)
        self.actor[i] = actor
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, n: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
        if n > self._size:
            raise ValueError(f"cannot sample {n} transitions from a buffer of {self._size}")
        idx = rng.integers(0, self._size, size=n)
        return {k: getattr(self, k)[idx] for k in ("obs", "act", "rew", "next_obs", "done", "actor")}

    def oldest(self) -> int:
        """Storage index of the oldest transition."""
        return self._next if self._size == self.capacity else 0
