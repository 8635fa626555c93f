"""Weighted directed communication graphs and their Laplacian partition.

Every matrix or stacked vector produced here uses the *internal* ordering:
leaders first (in the order given by ``leader_set``), then followers in
ascending node id. ``DirectedGraph.order`` maps internal positions back to
user-facing node ids.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import InvalidGraph


@dataclass(frozen=True)
class DirectedGraph:
    """Directed graph over ``node_count`` agents.

    Each edge ``(j, i, w)`` means agent ``i`` receives information from
    agent ``j`` with weight ``w > 0``.
    """

    node_count: int
    leaders: tuple[int, ...]
    edges: tuple[tuple[int, int, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "leaders", tuple(int(v) for v in self.leaders))
        object.__setattr__(
            self, "edges", tuple((int(j), int(i), float(w)) for j, i, w in self.edges)
        )
        self._validate()

    def _validate(self):
        n = self.node_count
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise InvalidGraph(f"node_count must be a positive integer, got {n!r}")
        if len(self.leaders) < 1:
            raise InvalidGraph("at least one leader is required")
        if len(set(self.leaders)) != len(self.leaders):
            raise InvalidGraph(f"duplicate leader indices: {self.leaders}")
        for v in self.leaders:
            if not 0 <= v < n:
                raise InvalidGraph(f"leader index {v} out of range 0..{n - 1}")
        leader_set = set(self.leaders)
        seen = set()
        for j, i, w in self.edges:
            if not (0 <= j < n and 0 <= i < n):
                raise InvalidGraph(f"edge ({j}, {i}) has a node index out of range")
            if i == j:
                raise InvalidGraph(f"self-loop on node {i}")
            if not (w > 0 and np.isfinite(w)):
                raise InvalidGraph(f"edge ({j}, {i}) weight must be positive, got {w}")
            if i in leader_set:
                raise InvalidGraph(f"leader {i} may not receive edges (edge from {j})")
            if (j, i) in seen:
                raise InvalidGraph(f"duplicate edge ({j}, {i})")
            seen.add((j, i))

    @classmethod
    def from_dict(cls, doc: dict) -> "DirectedGraph":
        try:
            return cls(int(doc["nodes"]), tuple(doc["leaders"]), tuple(tuple(e) for e in doc["edges"]))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InvalidGraph):
                raise
            raise InvalidGraph(f"malformed graph document: {exc}") from exc

    def to_dict(self) -> dict:
        return {
            "nodes": self.node_count,
            "leaders": list(self.leaders),
            "edges": [[j, i, w] for j, i, w in self.edges],
        }

    @cached_property
    def followers(self) -> tuple[int, ...]:
        leader_set = set(self.leaders)
        return tuple(v for v in range(self.node_count) if v not in leader_set)

    @property
    def order(self) -> tuple[int, ...]:
        """User node ids listed in internal (leaders-first) order."""
        return self.leaders + self.followers

    @cached_property
    def position(self) -> dict[int, int]:
        """User node id -> internal index."""
        return {v: k for k, v in enumerate(self.order)}

    @property
    def leader_count(self) -> int:
        return len(self.leaders)

    @property
    def follower_count(self) -> int:
        return len(self.followers)

    @cached_property
    def adjacency(self) -> np.ndarray:
        """Adjacency matrix in internal order; ``adj[i, j] = a_ij``."""
        adj = np.zeros((self.node_count, self.node_count))
        pos = self.position
        for j, i, w in self.edges:
            adj[pos[i], pos[j]] = w
        return adj

    def in_neighbors(self, node: int) -> list[tuple[int, float]]:
        return [(j, w) for j, i, w in self.edges if i == node]

    def scaled(self, factor: float) -> "DirectedGraph":
        return DirectedGraph(
            self.node_count, self.leaders, tuple((j, i, w * factor) for j, i, w in self.edges)
        )

    def relabeled(self, mapping: dict[int, int]) -> "DirectedGraph":
        """Rename nodes via ``mapping`` (a permutation of 0..node_count-1)."""
        return DirectedGraph(
            self.node_count,
            tuple(mapping[v] for v in self.leaders),
            tuple((mapping[j], mapping[i], w) for j, i, w in self.edges),
        )


@dataclass(frozen=True)
class LaplacianPartition:
    """Full Laplacian in internal order plus its leader/follower blocks.

    ``L1`` is the follower-follower block and ``L2`` the follower-leader
    block (followers x leaders); the leader rows of ``L`` are zero.
    """

    L: np.ndarray
    L1: np.ndarray
    L2: np.ndarray
    leader_count: int = field(default=1)

    @property
    def follower_count(self) -> int:
        return self.L1.shape[0]


def build_laplacian(g: DirectedGraph) -> LaplacianPartition:
    adj = g.adjacency
    L = np.diag(adj.sum(axis=1)) - adj
    m = g.leader_count
    return LaplacianPartition(L=L, L1=L[m:, m:].copy(), L2=L[m:, :m].copy(), leader_count=m)


@dataclass(frozen=True)
class AssumptionReport:
    satisfied: bool
    reached: dict[int, bool]
    unreachable: list[int]
    leader_count: int

    def to_dict(self) -> dict:
        return {
            "satisfied": self.satisfied,
            "leader_count": self.leader_count,
            "reached": {str(k): v for k, v in self.reached.items()},
            "unreachable": self.unreachable,
        }


def reachable_from_leaders(g: DirectedGraph) -> set[int]:
    """Nodes reachable along edge direction from any leader (BFS)."""
    out: dict[int, list[int]] = {v: [] for v in range(g.node_count)}
    for j, i, _ in g.edges:
        out[j].append(i)
    seen = set(g.leaders)
    queue = deque(g.leaders)
    while queue:
        v = queue.popleft()
        for nxt in out[v]:
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def check_assumption(g: DirectedGraph) -> AssumptionReport:
    """Check that every follower has a directed path from some leader.

    With a single leader this is the spanning-tree condition rooted at the
    leader; with several it is the per-follower reachability condition used
    for containment.
    """
    seen = reachable_from_leaders(g)
    reached = {v: v in seen for v in g.followers}
    unreachable = [v for v, ok in reached.items() if not ok]
    return AssumptionReport(
        satisfied=not unreachable, reached=reached, unreachable=unreachable, leader_count=g.leader_count
    )


def random_graph(
    rng: np.random.Generator,
    followers: int,
    leaders: int = 1,
    edge_prob: float = 0.3,
    weight_interval: tuple[float, float] = (0.0, 3.0),
    ensure_reachable: bool = True,
    grid_bits: int | None = 32,
) -> DirectedGraph:
    """Random leader-follower digraph; leaders are nodes ``0..leaders-1``.

    With ``ensure_reachable`` every follower gets one parent drawn from the
    nodes before it, so each follower is reachable from a leader. Weights
    are snapped to multiples of ``2**-grid_bits`` so Laplacian row sums
    cancel exactly in floating point; pass ``None`` for raw draws.
    """
    n = leaders + followers
    lo, hi = weight_interval
    pairs = set()
    if ensure_reachable:
        for i in range(leaders, n):
            pairs.add((int(rng.integers(0, i)), i))
    for i in range(leaders, n):
        for j in range(n):
            if j != i and rng.random() < edge_prob:
                pairs.add((j, i))
    edges = []
    for j, i in sorted(pairs):
        w = 0.0
        while w <= max(lo, 0.0) or w >= hi:
            w = rng.uniform(lo, hi)
            if grid_bits is not None:
                w = math.ldexp(round(math.ldexp(w, grid_bits)), -grid_bits)
        edges.append((j, i, w))
    return DirectedGraph(n, tuple(range(leaders)), tuple(edges))
