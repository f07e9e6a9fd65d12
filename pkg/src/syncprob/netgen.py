"""Network models: K-regular rings, Erdos-Renyi and Newman-Watts graphs.

Graphs are stored as dense symmetric adjacency matrices.  Random models draw
one uniform variate per unordered node pair ``(i, j), i < j`` in row-major
pair order from a Philox stream keyed by the seed, so an edge decision depends
only on ``(seed, pair index)``.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError

__all__ = [
    "Graph",
    "Laplacian",
    "build_ring",
    "build_er",
    "build_nw",
    "build_graph",
    "is_connected",
    "connected_components",
]

# Stream tags keep the ER layer of an NW graph independent from a plain ER
# graph that happens to use the same seed.
_ER_STREAM = 0
_NW_STREAM = 1


@dataclass(frozen=True)
class Laplacian:
    matrix: np.ndarray
    degrees: np.ndarray


@dataclass(frozen=True, eq=False)
class Graph:
    """Symmetric (weighted) graph with a provenance tag.

    Parameters
    ----------
    adjacency : ndarray, shape (n, n)
        Nonnegative adjacency with zero diagonal.  ``adjacency[i, j]`` is the
        weight of the link from node ``j`` into node ``i``.
    model_tag : dict
        ``{"model": "ring", "k": ...}``, ``{"model": "er", "p": ..., "seed": ...}``,
        ``{"model": "nw", "k": ..., "p": ..., "seed": ...}`` or ``{"model": "custom"}``.
    """

    adjacency: np.ndarray
    model_tag: dict = field(default_factory=lambda: {"model": "custom"})

    def __post_init__(self):
        a = np.array(self.adjacency, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise InvalidParameterError("adjacency must be a square matrix")
        if np.any(a < 0) or np.any(np.diag(a) != 0):
            raise InvalidParameterError("adjacency must be nonnegative with zero diagonal")
        a.setflags(write=False)
        object.__setattr__(self, "adjacency", a)
        object.__setattr__(self, "model_tag", dict(self.model_tag))

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        """In-degree vector ``d_i = sum_j a_ij``."""
        return self.adjacency.sum(axis=1)

    @property
    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.adjacency, self.adjacency.T))

    def laplacian(self) -> Laplacian:
        d = self.degrees
        m = np.diag(d) - self.adjacency
        m.setflags(write=False)
        return Laplacian(matrix=m, degrees=d)

    def edges(self):
        """Directed edge list ``(i, j, a_ij)`` for every nonzero entry, row-major."""
        i, j = np.nonzero(self.adjacency)
        return i, j, self.adjacency[i, j]

    def to_json(self) -> str:
        directed = not self.is_symmetric
        src = self.adjacency if directed else np.triu(self.adjacency)
        i, j = np.nonzero(src)
        edges = [[int(a), int(b), float(self.adjacency[a, b])] for a, b in zip(i, j)]
        payload = {"n": self.n, "edges": edges, "model_tag": self.model_tag}
        if directed:
            payload["directed"] = True
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Graph":
        obj = json.loads(text)
        n = int(obj["n"])
        a = np.zeros((n, n))
        for i, j, w in obj["edges"]:
            a[i, j] = w
            if not obj.get("directed", False):
                a[j, i] = w
        return cls(a, obj.get("model_tag", {"model": "custom"}))


def _check_ring(n, k):
    if n < 3:
        raise InvalidParameterError(f"ring needs n >= 3, got {n}")
    if k <= 0 or k % 2 or k >= n:
        raise InvalidParameterError(f"ring degree k must be even with 0 < k < n, got k={k}, n={n}")


def _check_p(p):
    if not 0.0 <= p <= 1.0:
        raise InvalidParameterError(f"p must lie in [0, 1], got {p}")


def _ring_adjacency(n, k):
    a = np.zeros((n, n))
    idx = np.arange(n)
    for off in range(1, k // 2 + 1):
        a[idx, (idx + off) % n] = 1.0
        a[(idx + off) % n, idx] = 1.0
    return a


def _pair_uniforms(n, seed, stream):
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), stream])))
    return rng.random(n * (n - 1) // 2)


def _er_layer(n, p, seed, stream):
    iu, ju = np.triu_indices(n, k=1)
    hit = _pair_uniforms(n, seed, stream) < p
    a = np.zeros((n, n))
    a[iu[hit], ju[hit]] = 1.0
    return a + a.T


def build_ring(n: int, k: int) -> Graph:
    """K-regular ring: node ``i`` links to its ``k/2`` nearest neighbours on each side."""
    _check_ring(n, k)
    return Graph(_ring_adjacency(n, k), {"model": "ring", "n": n, "k": k})


def build_er(n: int, p: float, seed: int) -> Graph:
    _check_p(p)
    if n < 1:
        raise InvalidParameterError("n must be positive")
    return Graph(_er_layer(n, p, seed, _ER_STREAM), {"model": "er", "n": n, "p": p, "seed": int(seed)})


def build_nw(n: int, k: int, p: float, seed: int) -> Graph:
    """Newman-Watts graph: ring substrate plus shortcuts on non-substrate pairs.

    Each pair not already linked by the ring is added independently with
    probability ``p``.  Weights stay in {0, 1}.
    """
    _check_ring(n, k)
    _check_p(p)
    ring = _ring_adjacency(n, k)
    extra = _er_layer(n, p, seed, _NW_STREAM)
    a = np.maximum(ring, extra)
    return Graph(a, {"model": "nw", "n": n, "k": k, "p": p, "seed": int(seed)})


def build_graph(tag: dict) -> Graph:
    """Rebuild a graph from its model tag."""
    model = tag.get("model")
    if model == "ring":
        return build_ring(int(tag["n"]), int(tag["k"]))
    if model == "er":
        return build_er(int(tag["n"]), float(tag["p"]), int(tag["seed"]))
    if model == "nw":
        return build_nw(int(tag["n"]), int(tag["k"]), float(tag["p"]), int(tag["seed"]))
    raise InvalidParameterError(f"unknown graph model {model!r}")


def connected_components(g: Graph) -> list[list[int]]:
    """Weakly connected components by breadth-first search."""
    nbr = (g.adjacency + g.adjacency.T) > 0
    seen = np.zeros(g.n, dtype=bool)
    comps = []
    for start in range(g.n):
        if seen[start]:
            continue
        seen[start] = True
        comp, queue = [], deque([start])
        while queue:
            u = queue.popleft()
            comp.append(u)
            for v in np.flatnonzero(nbr[u] & ~seen):
                seen[v] = True
                queue.append(int(v))
        comps.append(sorted(comp))
    return comps


def is_connected(g: Graph) -> bool:
    return len(connected_components(g)) == 1
