"""Null hypotheses about interference, expressed through exposure signatures.

A hypothesis says which features of an assignment may move a unit's outcome.
The *exposure signature* of unit ``i`` under assignment ``w`` collects exactly
those features, so two assignments give ``i`` the same outcome under the null
whenever their signatures agree. Intersecting these level sets over the focal
units yields the restricted assignment set the conditional test samples from.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError
from .netgraph import Network, NetworkPair, ball, multi_source_distances
from .specstr import ensure_consumed, parse_spec, take

MAX_ORDER = 4

KINDS = (
    "no-effects",
    "no-spillovers",
    "no-korder",
    "no-direct",
    "sparsification",
    "no-heterogeneity",
    "threshold",
)


@dataclass(frozen=True)
class NullHypothesis:
    kind: str
    k: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown hypothesis {self.kind!r}")
        if self.kind == "no-korder":
            if self.k is None or self.k < 1:
                raise ConfigError("no-korder needs k >= 1")
        elif self.k is not None:
            raise ConfigError(f"{self.kind} takes no k")

    @property
    def needs_pair(self) -> bool:
        return self.kind == "sparsification"

    @property
    def count_preserving(self) -> bool:
        """Level sets fix neighbor *counts* rather than individual treatments."""
        return self.kind in ("no-heterogeneity", "threshold")

    def __str__(self):
        return f"no-korder:k={self.k}" if self.kind == "no-korder" else self.kind


def NoKthOrder(k: int) -> NullHypothesis:
    return NullHypothesis("no-korder", int(k))


def parse_hypothesis(text: str, max_order: int = MAX_ORDER) -> NullHypothesis:
    """Parse ``"no-spillovers"``, ``"no-korder:k=2"``, ``"threshold"``, ..."""
    if isinstance(text, NullHypothesis):
        return text
    name, opts = parse_spec(text)
    k = take(opts, "k", int, source=text)
    ensure_consumed(opts, text)
    if name == "no-korder":
        if k is None:
            raise ConfigError("no-korder requires k, e.g. 'no-korder:k=2'")
        if k > max_order:
            raise ConfigError(f"k={k} exceeds the configured limit {max_order}")
    return NullHypothesis(name, k)


def base_network(nets) -> Network:
    """The network single-network hypotheses refer to (``g1`` of a pair)."""
    return nets.g1 if isinstance(nets, NetworkPair) else nets


def _check_nets(h: NullHypothesis, nets) -> None:
    if h.needs_pair and not isinstance(nets, NetworkPair):
        raise ConfigError("the sparsification hypothesis needs a NetworkPair")


def signature(h: NullHypothesis, nets, i: int, w) -> tuple:
    """Canonical exposure signature of unit ``i`` under assignment ``w``."""
    _check_nets(h, nets)
    w = np.asarray(w)
    g = base_network(nets)
    i = int(i)
    kind = h.kind
    if kind == "no-effects":
        return ()
    if kind == "no-spillovers":
        return (int(w[i]),)
    if kind == "no-korder":
        units = ball(g, i, h.k - 1)
        return tuple(int(w[j]) for j in units)
    if kind == "no-direct":
        return tuple(int(w[j]) for j in g.neighbors(i))
    if kind == "sparsification":
        return (int(w[i]), tuple(int(w[j]) for j in g.neighbors(i)))
    count = int(w[g.neighbors(i)].sum())
    if kind == "no-heterogeneity":
        return (int(w[i]), count)
    return (int(w[i]), int(count > 0))


def constrained_units(h: NullHypothesis, nets, focal) -> np.ndarray:
    """Units whose treatment every assignment in the restricted set must share.

    For the count-preserving hypotheses only the focal units are returned;
    the remaining count constraints are enforced by the sampler's grouping.
    """
    _check_nets(h, nets)
    g = base_network(nets)
    focal = np.unique(np.asarray(focal, dtype=np.int64))
    kind = h.kind
    if kind == "no-effects":
        return np.empty(0, dtype=np.int64)
    if kind in ("no-spillovers", "no-heterogeneity", "threshold"):
        return focal
    if kind == "no-korder":
        if focal.size == 0:
            return focal
        dist = multi_source_distances(g, focal, cutoff=h.k - 1)
        return np.flatnonzero(dist >= 0)
    if kind == "no-direct":
        if focal.size == 0:
            return focal
        return np.unique(np.concatenate([g.neighbors(i) for i in focal]))
    # sparsification: focal units plus their g1-neighbors
    parts = [focal] + [g.neighbors(i) for i in focal]
    return np.unique(np.concatenate(parts)) if focal.size else focal


def same_cell(h: NullHypothesis, nets, focal, w, w_other) -> bool:
    """Whether ``w_other`` lies in the restricted set generated by ``w``."""
    return all(signature(h, nets, i, w) == signature(h, nets, i, w_other) for i in np.asarray(focal).ravel())
