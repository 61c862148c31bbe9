"""Undirected networks, derived adjacency structures and random generators."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp
from sklearn.utils import check_random_state

from .exceptions import EdgeListParseError, SelfLoopError

UNREACHABLE = math.inf


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class Network:
    """Immutable undirected simple graph on units ``0 .. n-1``.

    Parameters
    ----------
    n : int
        Number of units.
    edges : array-like of shape (m, 2)
        Unordered unit pairs. Reversed and repeated pairs are merged;
        self-loops raise :class:`SelfLoopError`.
    """

    def __init__(self, n: int, edges: Iterable = ()):
        n = int(n)
        if n < 0:
            raise ValueError("n must be nonnegative")
        e = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
        e = e.reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= n):
            raise ValueError(f"edge endpoint out of range for n={n}")
        loops = e[:, 0] == e[:, 1]
        if loops.any():
            u = int(e[loops][0, 0])
            raise SelfLoopError(f"self-loop on unit {u}")
        e = np.sort(e, axis=1)
        e = np.unique(e, axis=0) if e.size else e
        self.n = n
        self.edges = _freeze(e)
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        adj = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
        adj.sort_indices()
        self._adj = adj
        self.degree = _freeze(np.diff(adj.indptr).astype(np.int64))

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def adjacency(self) -> sp.csr_matrix:
        """Symmetric 0/1 adjacency as a CSR matrix (a copy)."""
        return self._adj.copy()

    def neighbors(self, i: int) -> np.ndarray:
        _check_unit(self, i)
        a = self._adj
        return a.indices[a.indptr[i]:a.indptr[i + 1]]

    def has_edge(self, i: int, j: int) -> bool:
        nb = self.neighbors(i)
        k = np.searchsorted(nb, j)
        return bool(k < nb.size and nb[k] == j)

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(a), int(b)) for a, b in self.edges}

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.edges, other.edges)

    def __hash__(self):
        return hash((self.n, self.edges.tobytes()))

    def __repr__(self):
        return f"Network(n={self.n}, n_edges={self.n_edges})"


@dataclass(frozen=True)
class NetworkPair:
    """Two competing specifications of the network on one unit set.

    ``g1`` is the network whose neighbors may have effects under the null,
    ``g2`` the competing (typically denser) network.
    """

    g1: Network
    g2: Network

    def __post_init__(self):
        if self.g1.n != self.g2.n:
            raise ValueError("networks in a pair must share the unit set")

    @property
    def n(self) -> int:
        return self.g1.n


@dataclass(frozen=True)
class SecondOrderAdjacency:
    """Neighbors-of-neighbors that are not themselves neighbors."""

    matrix: sp.csr_matrix

    @property
    def pairs(self) -> np.ndarray:
        upper = sp.triu(self.matrix, k=1).tocoo()
        order = np.lexsort((upper.col, upper.row))
        return np.column_stack([upper.row[order], upper.col[order]]).astype(np.int64)

    @property
    def row_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    def __contains__(self, pair) -> bool:
        i, j = pair
        return bool(self.matrix[i, j])


def _check_unit(net: Network, i) -> None:
    if not 0 <= int(i) < net.n:
        raise IndexError(f"unit {i} out of range for n={net.n}")


# ---------------------------------------------------------------------------
# construction


def from_edge_list(
    lines: Iterable[str],
    id_map: Mapping[str, int] | None = None,
    n: int | None = None,
) -> Network:
    """Parse whitespace-separated id pairs, one edge per line.

    Blank lines and lines starting with ``#`` are ignored. With ``id_map``
    every token is looked up as a string label; otherwise tokens must be
    nonnegative integers and ``n`` defaults to ``max id + 1``.
    """
    pairs = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise EdgeListParseError(f"expected two ids, got {len(parts)} fields", lineno)
        ids = []
        for tok in parts:
            if id_map is not None:
                if tok not in id_map:
                    raise EdgeListParseError(f"unknown unit id {tok!r}", lineno)
                ids.append(int(id_map[tok]))
            else:
                try:
                    v = int(tok)
                except ValueError:
                    raise EdgeListParseError(f"non-integer unit id {tok!r}", lineno) from None
                if v < 0:
                    raise EdgeListParseError(f"negative unit id {v}", lineno)
                ids.append(v)
        if ids[0] == ids[1]:
            raise SelfLoopError(f"self-loop on unit {parts[0]}", lineno)
        pairs.append(ids)
    if n is None:
        if id_map is not None:
            n = len(id_map)
        else:
            n = max((max(p) for p in pairs), default=-1) + 1
    elif pairs and max(max(p) for p in pairs) >= n:
        raise EdgeListParseError(f"unit id exceeds declared node count {n}")
    return Network(n, np.asarray(pairs, dtype=np.int64).reshape(-1, 2))


def read_edge_list(path, id_map=None, n=None) -> Network:
    with open(path, encoding="utf-8") as fh:
        return from_edge_list(fh, id_map=id_map, n=n)


def write_edge_list(net: Network, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for a, b in net.edges:
            fh.write(f"{a} {b}\n")


def dyad_network(n_pairs: int) -> Network:
    """``n_pairs`` disjoint dyads; unit ``2m`` is paired with ``2m + 1``."""
    if n_pairs < 1:
        raise ValueError("n_pairs must be at least 1")
    left = np.arange(0, 2 * n_pairs, 2)
    return Network(2 * n_pairs, np.column_stack([left, left + 1]))


def partner(i: int) -> int:
    """Dyad partner of unit ``i`` in :func:`dyad_network`."""
    return i ^ 1


def watts_strogatz(n: int, k: int, p_rw: float, seed=None, rewire: str = "edges") -> Network:
    """Watts-Strogatz small-world network.

    Start from a ring lattice where every unit links to its ``k // 2`` nearest
    units on each side, then rewire, never creating self-loops or duplicates.

    ``rewire="edges"`` drops each lattice edge with probability ``p_rw`` and
    puts the same number of uniformly random new edges back; at ``k=10,
    p_rw=0.1`` the degree standard deviation is about 1.37.
    ``rewire="single"`` keeps the near endpoint of each lattice edge and moves
    the far endpoint with probability ``p_rw`` (standard deviation about 0.97).
    """
    if k % 2 or k < 0:
        raise ValueError("k must be a nonnegative even integer")
    if k >= n:
        raise ValueError("k must be smaller than n")
    if not 0.0 <= p_rw <= 1.0:
        raise ValueError("p_rw must lie in [0, 1]")
    if rewire not in ("edges", "single"):
        raise ValueError("rewire must be 'edges' or 'single'")
    rng = check_random_state(seed)
    half = k // 2
    lattice = [(u, (u + j) % n) for j in range(1, half + 1) for u in range(n)]
    coins = rng.random_sample(len(lattice)) < p_rw
    adj = [set() for _ in range(n)]
    for u, v in lattice:
        adj[u].add(v)
        adj[v].add(u)

    if rewire == "edges":
        dropped = [e for e, c in zip(lattice, coins) if c]
        for u, v in dropped:
            adj[u].discard(v)
            adj[v].discard(u)
        budget = min(len(dropped), n * (n - 1) // 2 - sum(map(len, adj)) // 2)
        while budget:
            u, v = (int(x) for x in rng.randint(n, size=2))
            if u == v or v in adj[u]:
                continue
            adj[u].add(v)
            adj[v].add(u)
            budget -= 1
    else:
        for (u, v), c in zip(lattice, coins):
            if not c or v not in adj[u] or len(adj[u]) >= n - 1:
                continue
            w = int(rng.randint(n))
            while w == u or w in adj[u]:
                w = int(rng.randint(n))
            adj[u].discard(v)
            adj[v].discard(u)
            adj[u].add(w)
            adj[w].add(u)
    edges = [(u, v) for u in range(n) for v in adj[u] if u < v]
    return Network(n, np.asarray(edges, dtype=np.int64).reshape(-1, 2))


def sparsify(net: Network, q: float, seed=None) -> Network:
    """Drop every edge independently with probability ``q``."""
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must lie in [0, 1]")
    rng = check_random_state(seed)
    keep = rng.random_sample(net.n_edges) >= q
    return Network(net.n, net.edges[keep])


def surrogate_network(n: int = 599, mean_degree: float = 5.1, sd_degree: float = 3.1,
                      max_degree: int = 18, seed=None) -> Network:
    """Friendship-like stand-in for a school network without public data.

    Degrees are ``1 + NegBin`` draws matched to ``mean_degree`` and
    ``sd_degree`` and capped at ``max_degree``; stubs are matched at random
    (configuration model), self-loops and duplicate edges are erased, and
    units left isolated are attached to a uniformly chosen partner.
    """
    rng = check_random_state(seed)
    m = mean_degree - 1.0
    var = sd_degree ** 2
    if var <= m:
        raise ValueError("sd_degree too small for a negative binomial fit")
    prob = m / var
    r = m * prob / (1.0 - prob)
    deg = np.minimum(1 + rng.negative_binomial(r, prob, size=n), max_degree)
    if deg.sum() % 2:
        deg[int(np.argmin(deg))] += 1
    stubs = np.repeat(np.arange(n), deg)
    rng.shuffle(stubs)
    pairs = stubs.reshape(-1, 2)
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    net = Network(n, pairs)
    isolated = np.flatnonzero(net.degree == 0)
    if isolated.size:
        extra = []
        for u in isolated:
            v = int(rng.randint(n - 1))
            extra.append((int(u), v + (v >= u)))
        net = Network(n, np.vstack([net.edges, np.asarray(extra)]))
    return net


def load_surrogate() -> Network:
    """The bundled 599-unit surrogate network (``surrogate_network(seed=2015)``)."""
    ref = resources.files("netexact") / "data" / "surrogate_599.edges"
    with ref.open("r", encoding="utf-8") as fh:
        return from_edge_list(fh, n=599)


# ---------------------------------------------------------------------------
# derived structures


def bfs_distances(net: Network, source: int, cutoff: int | None = None) -> np.ndarray:
    """Hop distances from ``source``; ``-1`` marks units not reached within ``cutoff``."""
    _check_unit(net, source)
    dist = np.full(net.n, -1, dtype=np.int64)
    dist[source] = 0
    indptr, indices = net._adj.indptr, net._adj.indices
    queue = deque([source])
    while queue:
        u = queue.popleft()
        du = dist[u]
        if cutoff is not None and du >= cutoff:
            continue
        for v in indices[indptr[u]:indptr[u + 1]]:
            if dist[v] < 0:
                dist[v] = du + 1
                queue.append(v)
    return dist


def multi_source_distances(net: Network, sources, cutoff: int | None = None) -> np.ndarray:
    """Hop distance from the nearest unit in ``sources``; ``-1`` if not reached."""
    dist = np.full(net.n, -1, dtype=np.int64)
    src = np.unique(np.asarray(sources, dtype=np.int64))
    dist[src] = 0
    frontier = src
    indptr, indices = net._adj.indptr, net._adj.indices
    d = 0
    while frontier.size and (cutoff is None or d < cutoff):
        nxt = np.concatenate([indices[indptr[u]:indptr[u + 1]] for u in frontier]) if frontier.size else frontier
        nxt = np.unique(nxt)
        nxt = nxt[dist[nxt] < 0]
        d += 1
        dist[nxt] = d
        frontier = nxt
    return dist


def ball(net: Network, i: int, radius: int) -> np.ndarray:
    """Units within ``radius`` hops of ``i`` (including ``i``), ascending."""
    if radius < 0:
        return np.empty(0, dtype=np.int64)
    dist = bfs_distances(net, i, cutoff=radius)
    return np.flatnonzero(dist >= 0)


def hop_distance(net: Network, i: int, j: int):
    """Shortest-path length between ``i`` and ``j``, or ``UNREACHABLE``."""
    _check_unit(net, i)
    _check_unit(net, j)
    d = bfs_distances(net, i)[j]
    return UNREACHABLE if d < 0 else int(d)


def second_order(net: Network) -> SecondOrderAdjacency:
    a = net._adj
    two = (a @ a).tocsr()
    two.setdiag(0)
    two.eliminate_zeros()
    h = (two > 0).astype(np.float64) - a.multiply(two > 0)
    h = sp.csr_matrix(h)
    h.eliminate_zeros()
    h.data[:] = 1.0
    h.sort_indices()
    return SecondOrderAdjacency(h)


def row_normalize(m: sp.spmatrix) -> sp.csr_matrix:
    """Scale rows to sum to one; all-zero rows stay zero."""
    m = sp.csr_matrix(m, dtype=np.float64)
    s = np.asarray(m.sum(axis=1)).ravel()
    inv = np.divide(1.0, s, out=np.zeros_like(s), where=s > 0)
    return sp.csr_matrix(sp.diags(inv) @ m)


def normalized_neighbor_weights(net: Network, i: int) -> tuple[np.ndarray, np.ndarray]:
    """Neighbors of ``i`` with weights ``1 / K_i`` (empty when isolated)."""
    nb = net.neighbors(i)
    if nb.size == 0:
        return nb, np.empty(0)
    return nb, np.full(nb.size, 1.0 / nb.size)


def distance_ring(net: Network, k: int) -> sp.csr_matrix:
    """Binary matrix of the pairs at hop distance exactly ``k`` (``k=2`` gives ``H``)."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    a = (net._adj > 0).astype(np.int8)
    reach = sp.identity(net.n, dtype=np.int8, format="csr")
    front = reach
    for _ in range(k):
        nxt = (front @ a) > 0
        nxt = sp.csr_matrix(nxt.astype(np.int8) - nxt.multiply(reach > 0).astype(np.int8))
        nxt.eliminate_zeros()
        reach = ((reach + nxt) > 0).astype(np.int8)
        front = nxt
    out = front.astype(np.float64).tocsr()
    out.sort_indices()
    return out
