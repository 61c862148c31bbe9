"""Focal-unit selection and the focal / buffer / auxiliary partition.

Selectors look only at the network (never at treatments or outcomes), which is
what keeps the conditional test valid. Every greedy selector breaks ties
uniformly at random using its seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from sklearn.utils import check_random_state

from .exceptions import ConfigError, EmptyFocalSetError
from .hypotheses import NullHypothesis, constrained_units
from .netgraph import Network, NetworkPair, bfs_distances, second_order
from .specstr import ensure_consumed, parse_spec, take

_TIE_TOL = 1e-12


@dataclass(frozen=True)
class FocalPartition:
    focal: np.ndarray
    buffer: np.ndarray
    auxiliary: np.ndarray

    @property
    def n(self) -> int:
        return self.focal.size + self.buffer.size + self.auxiliary.size

    def indicator(self, which: str) -> np.ndarray:
        out = np.zeros(self.n, dtype=np.float64)
        out[getattr(self, which)] = 1.0
        return out


def partition(h: NullHypothesis, nets, focal) -> FocalPartition:
    """Split the units into focal, buffer (pinned non-focal) and auxiliary."""
    n = nets.n
    focal = np.unique(np.asarray(focal, dtype=np.int64))
    if focal.size and (focal[0] < 0 or focal[-1] >= n):
        raise ConfigError("focal unit out of range")
    fixed = constrained_units(h, nets, focal)
    buffer = np.setdiff1d(fixed, focal)
    aux = np.setdiff1d(np.arange(n), np.union1d(focal, buffer))
    for a in (focal, buffer, aux):
        a.setflags(write=False)
    return FocalPartition(focal, buffer, aux)


def _mask(n: int, eligible) -> np.ndarray:
    if eligible is None:
        return np.ones(n, dtype=bool)
    m = np.asarray(eligible)
    if m.dtype != bool:
        out = np.zeros(n, dtype=bool)
        out[m.astype(np.int64)] = True
        return out
    if m.shape != (n,):
        raise ConfigError(f"eligibility mask has shape {m.shape}, expected ({n},)")
    return m


def _pick_max(score: np.ndarray, candidates: np.ndarray, rng) -> tuple[int, float]:
    """Uniform choice among the candidates attaining the maximal score."""
    vals = score[candidates]
    best = vals.max()
    tol = _TIE_TOL * max(1.0, abs(best))
    ties = candidates[vals >= best - tol]
    j = ties[0] if ties.size == 1 else ties[rng.randint(ties.size)]
    return int(j), float(best)


def _finish(focal) -> np.ndarray:
    out = np.sort(np.asarray(focal, dtype=np.int64))
    out.setflags(write=False)
    return out


def select_random(n: int, fraction: float, seed=None, eligible=None) -> np.ndarray:
    """``round(fraction * n_eligible)`` units uniformly, at least one."""
    if not 0 < fraction < 1:
        raise ConfigError(f"fraction must be in (0, 1), got {fraction}")
    pool = np.flatnonzero(_mask(n, eligible))
    if pool.size == 0:
        return _finish([])
    size = min(max(1, math.floor(fraction * pool.size + 0.5)), pool.size)
    rng = check_random_state(seed)
    return _finish(rng.choice(pool, size=size, replace=False))


def select_eps_net(net: Network, eps: int = 2, seed=None, eligible=None) -> np.ndarray:
    """Greedy random eps-net: focal units pairwise at least ``eps`` hops apart."""
    if eps < 2:
        raise ConfigError(f"eps must be >= 2, got {eps}")
    rng = check_random_state(seed)
    open_ = _mask(net.n, eligible).copy()
    chosen = []
    for u in rng.permutation(net.n):
        if not open_[u]:
            continue
        chosen.append(u)
        open_[bfs_distances(net, int(u), cutoff=eps - 1) >= 0] = False
    return _finish(chosen)


def select_greedy_edges(net: Network, criterion: str = "delta", seed=None, eligible=None) -> np.ndarray:
    """Greedily maximize focal-auxiliary edges.

    ``criterion="raw"`` uses ``K_A - K_F``; ``"delta"`` divides it by the degree.
    """
    if criterion not in ("raw", "delta"):
        raise ConfigError(f"criterion must be 'raw' or 'delta', got {criterion!r}")
    rng = check_random_state(seed)
    deg = net.degree.astype(np.float64)
    gain = deg.copy()  # K_A - K_F with nobody focal
    scale = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0) if criterion == "delta" else np.ones_like(deg)
    open_ = _mask(net.n, eligible).copy()
    chosen = []
    while open_.any():
        cand = np.flatnonzero(open_)
        j, best = _pick_max(gain * scale, cand, rng)
        if best <= 0:
            break
        chosen.append(j)
        open_[j] = False
        gain[net.neighbors(j)] -= 2.0
    return _finish(chosen)


def select_greedy_higher_order(net: Network, seed=None, eligible=None) -> np.ndarray:
    """Greedily add focal-auxiliary second-order pairs, normalized per unit.

    The score of a non-focal unit ``i`` is the gain in its own share of
    auxiliary second-order neighbors minus the share lost by existing focal
    units whose second-order auxiliary neighbors become buffer units.
    """
    rng = check_random_state(seed)
    n = net.n
    g = net.adjacency
    h = second_order(net).matrix
    hdeg = np.asarray(h.sum(axis=1)).ravel()
    inv_h = np.divide(1.0, hdeg, out=np.zeros_like(hdeg), where=hdeg > 0)
    f = np.zeros(n)
    a = np.ones(n)
    open_ = _mask(n, eligible).copy()
    chosen = []
    while open_.any():
        term1 = (h @ a - a * (h @ f)) * inv_h
        term2 = g @ (a * (h @ (f * inv_h)))
        cand = np.flatnonzero(open_)
        j, best = _pick_max(term1 - term2, cand, rng)
        if best <= 0:
            break
        chosen.append(j)
        open_[j] = False
        f[j] = 1.0
        a[j] = 0.0
        a[net.neighbors(j)] = 0.0
    return _finish(chosen)


def _g2_only(pair: NetworkPair) -> sp.csr_matrix:
    g1, g2 = pair.g1.adjacency, pair.g2.adjacency
    d = sp.csr_matrix(g2 - g1.multiply(g2))
    d.eliminate_zeros()
    return d


def competing_gain(pair: NetworkPair, f: np.ndarray, d=None) -> np.ndarray:
    """Change in the count of G2-only focal-auxiliary pairs from adding each unit."""
    g1 = pair.g1.adjacency
    d = _g2_only(pair) if d is None else d
    a = (1.0 - f) * ((g1 @ f) == 0)
    df = d @ f
    # new pairs from i, minus pairs lost by i itself and by its G1-neighbors turning buffer
    return d @ a - a * df - g1 @ (a * df)


def select_greedy_competing(pair: NetworkPair, seed=None, eligible=None) -> np.ndarray:
    """Greedily add focal units linked to auxiliary units in G2 but not in G1."""
    if not isinstance(pair, NetworkPair):
        raise ConfigError("greedy-cn needs a NetworkPair")
    rng = check_random_state(seed)
    d = _g2_only(pair)
    f = np.zeros(pair.n)
    open_ = _mask(pair.n, eligible).copy()
    chosen = []
    while open_.any():
        cand = np.flatnonzero(open_)
        j, best = _pick_max(competing_gain(pair, f, d), cand, rng)
        if best <= 0:
            break
        chosen.append(j)
        open_[j] = False
        f[j] = 1.0
    return _finish(chosen)


def heterogeneity_spread(net: Network, f: np.ndarray) -> np.ndarray:
    """``S_U`` for every non-focal unit; NaN for focal units and where fewer
    than two neighbors are non-focal."""
    g = net.adjacency
    m = 1.0 - np.asarray(f, dtype=np.float64)
    c = g @ m
    # U_ij counts non-focal neighbors of j other than the non-focal candidate i
    u = (g @ m - 1.0) * m
    s1 = g @ u
    s2 = g @ (u * u)
    k = net.degree.astype(np.float64)
    out = np.full(net.n, np.nan)
    ok = (c >= 2) & (m == 1)
    ss = np.maximum(s2[ok] - s1[ok] ** 2 / c[ok], 0.0)
    out[ok] = np.sqrt(ss / (k[ok] - 1.0))
    return out


def select_heterogeneity(net: Network, target_fraction: float = 0.3, seed=None, eligible=None) -> np.ndarray:
    """Sequentially add units whose non-focal neighbors vary most in non-focal degree."""
    if not 0 < target_fraction < 1:
        raise ConfigError(f"target_fraction must be in (0, 1), got {target_fraction}")
    rng = check_random_state(seed)
    n = net.n
    target = max(1, math.floor(target_fraction * n + 0.5))
    f = np.zeros(n)
    open_ = _mask(n, eligible).copy()
    chosen = []
    while len(chosen) < target:
        s = heterogeneity_spread(net, f)
        cand = np.flatnonzero(open_ & ~np.isnan(s))
        if cand.size == 0:
            break
        j, _ = _pick_max(s, cand, rng)
        chosen.append(j)
        open_[j] = False
        f[j] = 1.0
    return _finish(chosen)


SELECTORS = ("random", "eps-net", "greedy-delta", "greedy-raw", "greedy-ho", "greedy-cn", "hetero")

# hypothesis-specific greedy selector behind the generic name "greedy"
GREEDY_FOR = {
    "no-effects": "greedy-delta",
    "no-spillovers": "greedy-delta",
    "no-korder": "greedy-ho",
    "no-direct": "greedy-delta",
    "sparsification": "greedy-cn",
    "no-heterogeneity": "hetero",
    "threshold": "hetero",
}


def resolve_selector(spec: str, hypothesis: NullHypothesis) -> str:
    """Replace the generic ``"greedy"`` by the selector built for ``hypothesis``."""
    name, _ = parse_spec(spec)
    return GREEDY_FOR[hypothesis.kind] if name == "greedy" else spec


def _single(nets, on: str) -> Network:
    if isinstance(nets, NetworkPair):
        return nets.g1 if on == "g1" else nets.g2
    return nets


def select_focal(spec: str, nets, seed=None, eligible=None) -> np.ndarray:
    """Run the selector named by a config string such as ``"eps-net:eps=2"``.

    On a ``NetworkPair`` single-network selectors use ``g2`` unless ``on=g1``.
    """
    name, opts = parse_spec(spec)
    on = take(opts, "on", str, default="g2", source=spec)
    if on not in ("g1", "g2"):
        raise ConfigError(f"'on' must be g1 or g2 in {spec!r}")
    if name == "random":
        frac = take(opts, "frac", float, default=0.5, source=spec)
        ensure_consumed(opts, spec)
        out = select_random(nets.n, frac, seed, eligible)
    elif name == "eps-net":
        eps = take(opts, "eps", int, default=2, source=spec)
        ensure_consumed(opts, spec)
        out = select_eps_net(_single(nets, on), eps, seed, eligible)
    elif name in ("greedy-delta", "greedy-raw"):
        ensure_consumed(opts, spec)
        out = select_greedy_edges(_single(nets, on), name.split("-")[1], seed, eligible)
    elif name == "greedy-ho":
        ensure_consumed(opts, spec)
        out = select_greedy_higher_order(_single(nets, on), seed, eligible)
    elif name == "greedy-cn":
        ensure_consumed(opts, spec)
        out = select_greedy_competing(nets, seed, eligible)
    elif name == "hetero":
        frac = take(opts, "frac", float, default=0.3, source=spec)
        ensure_consumed(opts, spec)
        out = select_heterogeneity(_single(nets, on), frac, seed, eligible)
    else:
        raise ConfigError(f"unknown selector {name!r}; expected one of {SELECTORS}")
    if out.size == 0:
        raise EmptyFocalSetError(f"selector {spec!r} returned no focal units")
    return out
