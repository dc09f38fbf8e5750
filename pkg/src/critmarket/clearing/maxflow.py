"""Level-graph (Dinic) maximum flow on real capacities."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

EPS = 1e-9


@dataclass
class FlowNetwork:
    num_nodes: int
    source: int
    sink: int
    tails: list[int] = field(default_factory=list)
    heads: list[int] = field(default_factory=list)
    capacities: list[float] = field(default_factory=list)
    labels: list[str] = field(default_factory=list)

    def add_node(self, label: str) -> int:
        self.labels.append(label)
        self.num_nodes = len(self.labels)
        return self.num_nodes - 1

    def add_arc(self, u: int, v: int, capacity: float) -> int:
        if capacity < 0:
            raise ValueError("arc capacity must be non-negative")
        self.tails.append(u)
        self.heads.append(v)
        self.capacities.append(float(capacity))
        return len(self.tails) - 1

    @property
    def num_arcs(self) -> int:
        return len(self.tails)

    def to_dot(self, flows: np.ndarray | None = None) -> str:
        lines = ["digraph flow {"]
        for i, lab in enumerate(self.labels):
            lines.append(f'  n{i} [label="{lab}"];')
        for a in range(self.num_arcs):
            cap = self.capacities[a]
            text = f"{cap:g}" if flows is None else f"{flows[a]:g}/{cap:g}"
            lines.append(f'  n{self.tails[a]} -> n{self.heads[a]} [label="{text}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def max_flow(network: FlowNetwork) -> np.ndarray:
    """Return a maximum ``source -> sink`` flow, one value per arc.

    Augmentations smaller than ``EPS`` are ignored.  With integer capacities the
    result is integral, since every augmentation is by an integer bottleneck.
    """
    n = network.num_nodes
    m = network.num_arcs
    # residual arcs: 2*a is forward, 2*a+1 is backward
    to = np.empty(2 * m, dtype=int)
    res = np.zeros(2 * m)
    adj: list[list[int]] = [[] for _ in range(n)]
    for a in range(m):
        u, v = network.tails[a], network.heads[a]
        to[2 * a], to[2 * a + 1] = v, u
        res[2 * a] = network.capacities[a]
        adj[u].append(2 * a)
        adj[v].append(2 * a + 1)
    to_l = to.tolist()
    res_l = res.tolist()
    s, t = network.source, network.sink
    if s == t:
        raise ValueError("source and sink must differ")

    def bfs() -> list[int] | None:
        level = [-1] * n
        level[s] = 0
        q = deque([s])
        while q:
            u = q.popleft()
            for e in adj[u]:
                if res_l[e] > EPS and level[to_l[e]] < 0:
                    level[to_l[e]] = level[u] + 1
                    q.append(to_l[e])
        return level if level[t] >= 0 else None

    def dfs(u: int, pushed: float, level: list[int], it: list[int]) -> float:
        if u == t:
            return pushed
        while it[u] < len(adj[u]):
            e = adj[u][it[u]]
            v = to_l[e]
            if res_l[e] > EPS and level[v] == level[u] + 1:
                got = dfs(v, min(pushed, res_l[e]), level, it)
                if got > EPS:
                    res_l[e] -= got
                    res_l[e ^ 1] += got
                    return got
            it[u] += 1
        return 0.0

    while True:
        level = bfs()
        if level is None:
            break
        it = [0] * n
        while True:
            pushed = dfs(s, float("inf"), level, it)
            if pushed <= EPS:
                break

    # the backward residual of an arc equals its flow (and stays finite for infinite capacities)
    flows = np.array([res_l[2 * a + 1] for a in range(m)])
    flows[np.abs(flows) < EPS] = 0.0
    return np.clip(flows, 0.0, None)


def flow_value(network: FlowNetwork, flows: np.ndarray) -> float:
    return float(sum(f for a, f in enumerate(flows) if network.tails[a] == network.source)
                 - sum(f for a, f in enumerate(flows) if network.heads[a] == network.source))
