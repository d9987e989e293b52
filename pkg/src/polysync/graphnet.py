"""Weighted leader-follower digraph machinery.

Followers are indexed 0..N-1 internally; the leader is a separate node that
reaches follower i through a positive pinning gain. ``adjacency[i, j] > 0``
means information flows from follower j to follower i.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .numkit import as_matrix


@dataclass(frozen=True)
class Topology:
    adjacency: np.ndarray  # (N, N), nonnegative, zero diagonal
    pinning: np.ndarray  # (N,), nonnegative leader gains

    def __post_init__(self):
        a = as_matrix(self.adjacency, "adjacency")
        if a.shape[0] != a.shape[1]:
            raise ShapeError(f"adjacency must be square, got {a.shape}")
        g = np.asarray(self.pinning, dtype=float).reshape(-1)
        if g.size != a.shape[0]:
            raise ShapeError(f"pinning length {g.size} != number of followers {a.shape[0]}")
        if np.any(a < 0) or np.any(g < 0):
            raise ValueError("edge weights and pinning gains must be nonnegative")
        if np.any(np.diag(a) != 0):
            raise ValueError("adjacency must have a zero diagonal (no self loops)")
        object.__setattr__(self, "adjacency", a)
        object.__setattr__(self, "pinning", g)

    @property
    def n_followers(self) -> int:
        return self.adjacency.shape[0]

    def in_degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)


def chain_topology(n_followers: int, weight: float = 1.0, pin_gain: float = 1.0) -> Topology:
    """Directed chain leader -> 1 -> 2 -> ... -> N with uniform weights."""
    a = np.zeros((n_followers, n_followers))
    for i in range(1, n_followers):
        a[i, i - 1] = weight
    g = np.zeros(n_followers)
    g[0] = pin_gain
    return Topology(a, g)


def laplacian(t: Topology) -> np.ndarray:
    """L = D - A with D the diagonal of in-degrees."""
    return np.diag(t.in_degrees()) - t.adjacency


def coupling(t: Topology) -> np.ndarray:
    """Normalized graph operator (I + D + G)^{-1} (L + G).

    The inverse always exists: I + D + G is diagonal with positive entries.
    """
    d = t.in_degrees()
    g = t.pinning
    lg = laplacian(t) + np.diag(g)
    return lg / (1.0 + d + g)[:, None]


def has_spanning_tree(t: Topology) -> bool:
    """True iff every follower is reachable from the leader node.

    Breadth-first search over the extended graph: leader edges to pinned
    followers plus the follower-to-follower edges.
    """
    n = t.n_followers
    seen = np.zeros(n, dtype=bool)
    queue = deque(int(i) for i in np.flatnonzero(t.pinning > 0))
    for i in queue:
        seen[i] = True
    while queue:
        j = queue.popleft()
        for i in np.flatnonzero(t.adjacency[:, j] > 0):
            if not seen[i]:
                seen[i] = True
                queue.append(int(i))
    return bool(seen.all())


def observer_composite(t: Topology, s, f) -> np.ndarray:
    """Estimation-error transition matrix I_N (x) S - coupling (x) F."""
    sm = as_matrix(s, "s")
    fm = as_matrix(f, "f")
    if sm.shape[0] != sm.shape[1] or fm.shape != sm.shape:
        raise ShapeError(f"s and f must be square and equal size, got {sm.shape}, {fm.shape}")
    n = t.n_followers
    return np.kron(np.eye(n), sm) - np.kron(coupling(t), fm)
