"""Test statistics for the conditional randomization test.

Every statistic reads outcomes of focal units only, so under the conditional
law its distribution is fully determined by the observed data. Statistics are
*prepared* once per (partition, outcomes, networks) and then evaluated on a
batch of assignments, one row per assignment; an undefined value is NaN.

Two families cover most of the statistics:

* edge-level contrasts: mean focal-ego outcome over focal-auxiliary pairs
  whose alter is treated, minus the same over pairs whose alter is control;
* score statistics: covariance of a null-model OLS residual (fit on focal
  units) with a treated-neighbor exposure, over a conditioning subset.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .exceptions import ConfigError, DataError, FocalOutcomeMissingError, IncompatibleStatisticError
from .focal import FocalPartition
from .hypotheses import NullHypothesis, base_network
from .netgraph import NetworkPair, distance_ring, row_normalize
from .specstr import ensure_consumed, parse_spec, take

STATISTICS = (
    "elc",
    "score",
    "htn",
    "elc-ho",
    "score-ho",
    "elc-cn",
    "score-cn",
    "score-het",
    "bond",
    "direct-diff",
)
POLICIES = ("skip", "zero", "error")

# statistics with a non-trivial distribution under each hypothesis family;
# under the sharp no-effects null every statistic is valid
COMPATIBLE = {
    "no-spillovers": ("elc", "score", "htn"),
    "no-korder": ("elc-ho", "score-ho"),
    "no-direct": ("direct-diff",),
    "sparsification": ("elc-cn", "score-cn"),
    "no-heterogeneity": ("score-het",),
    "threshold": ("score-het",),
    "no-effects": STATISTICS,
}
NEEDS_PAIR = ("elc-cn", "score-cn")


@dataclass(frozen=True)
class OutcomeData:
    """Observed outcomes; NaN marks a missing value."""

    y: np.ndarray

    def __post_init__(self):
        y = np.array(self.y, dtype=np.float64).ravel()
        y.setflags(write=False)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_values(cls, y, observed=None):
        y = np.array(y, dtype=np.float64)
        if observed is not None:
            y[~np.asarray(observed, dtype=bool)] = np.nan
        return cls(y)

    @property
    def observed(self) -> np.ndarray:
        return ~np.isnan(self.y)

    def require(self, units) -> None:
        units = np.asarray(units, dtype=np.int64)
        missing = units[np.isnan(self.y[units])]
        if missing.size:
            head = ", ".join(str(i) for i in missing[:5])
            raise FocalOutcomeMissingError(f"{missing.size} focal unit(s) lack an outcome (e.g. {head})")


@dataclass(frozen=True)
class StatisticSpec:
    kind: str
    degenerate: str = "skip"

    def __post_init__(self):
        if self.kind not in STATISTICS:
            raise ConfigError(f"unknown statistic {self.kind!r}; expected one of {STATISTICS}")
        if self.degenerate not in POLICIES:
            raise ConfigError(f"unknown degenerate policy {self.degenerate!r}; expected one of {POLICIES}")

    def __str__(self):
        return self.kind if self.degenerate == "skip" else f"{self.kind}:degenerate={self.degenerate}"


def parse_statistic(text) -> StatisticSpec:
    """Parse ``"score"`` or ``"elc:degenerate=zero"``."""
    if isinstance(text, StatisticSpec):
        return text
    name, opts = parse_spec(text)
    policy = take(opts, "degenerate", str, default="skip", source=text)
    ensure_consumed(opts, text)
    return StatisticSpec(name, policy)


def check_compatible(stat: StatisticSpec, h: NullHypothesis, nets) -> None:
    kind = stat.kind
    allowed = COMPATIBLE[h.kind]
    if h.kind == "no-korder" and h.k == 1:
        allowed = COMPATIBLE["no-spillovers"]
    if kind not in allowed:
        raise IncompatibleStatisticError(f"statistic {kind!r} does not fit hypothesis {h}; use one of {allowed}")
    if kind in NEEDS_PAIR and not isinstance(nets, NetworkPair):
        raise IncompatibleStatisticError(f"statistic {kind!r} needs two networks")


# ---------------------------------------------------------------------------
# prepared evaluators


def _rows(w) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    return w[None, :] if w.ndim == 1 else w


class _Prepared:
    def __call__(self, w) -> np.ndarray:
        w = np.asarray(w)
        out = self.evaluate(_rows(w))
        return out[0] if w.ndim == 1 else out


class EdgeContrast(_Prepared):
    """Ego-outcome contrast over the pairs in ``pairs`` with focal ego and
    eligible alter, split by the alter's treatment.

    Only the alter treatment varies across pairs, so each alter carries the
    summed focal-ego outcome ``c1`` and the focal-ego count ``c2``.
    """

    def __init__(self, pairs: sp.spmatrix, ego: np.ndarray, alter: np.ndarray, y: np.ndarray):
        pairs = sp.csr_matrix(pairs)
        fy = np.where(ego > 0, y, 0.0)
        self.c1 = alter * (pairs.T @ fy)
        self.c2 = alter * (pairs.T @ ego)
        self.s1 = self.c1.sum()
        self.s2 = self.c2.sum()

    def evaluate(self, w: np.ndarray) -> np.ndarray:
        t1, n1 = w @ self.c1, w @ self.c2
        t0, n0 = self.s1 - t1, self.s2 - n1
        ok = (n1 > 0) & (n0 > 0)
        out = np.full(w.shape[0], np.nan)
        out[ok] = t1[ok] / n1[ok] - t0[ok] / n0[ok]
        return out


class ScoreCovariance(_Prepared):
    """Covariance of an OLS residual with an exposure over a conditioning subset.

    Regressors are an intercept, own treatment, and ``extra`` neighbor
    fractions, fit on all focal units; ``exposure`` rows give the exposure of
    each focal unit and ``cond`` selects focal units entering the covariance.
    """

    def __init__(self, focal: np.ndarray, y: np.ndarray, extra: list, exposure: sp.spmatrix, cond: np.ndarray):
        self.focal = focal
        self.y = y[focal]
        self.extra = [sp.csr_matrix(m[focal]) for m in extra]
        self.exposure = sp.csr_matrix(exposure[focal][cond])
        self.cond = cond
        self.n_cond = int(cond.sum())

    def design(self, w: np.ndarray) -> np.ndarray:
        cols = [np.ones((w.shape[0], self.focal.size)), w[:, self.focal]]
        cols += [(m @ w.T).T for m in self.extra]
        return np.stack(cols, axis=2)

    def residuals(self, w: np.ndarray) -> np.ndarray:
        """OLS residuals per row of ``w``; NaN rows where the fit is rank deficient."""
        x = self.design(w)
        b, nf, p = x.shape
        out = np.full((b, nf), np.nan)
        if nf < p:
            return out
        same = (x == x[:1]).all(axis=(1, 2))
        if same.all():
            x0 = x[0]
            if np.linalg.matrix_rank(x0) < p:
                return out
            beta = np.linalg.lstsq(x0, self.y, rcond=None)[0]
            out[:] = self.y - x0 @ beta
            return out
        full = np.linalg.matrix_rank(x) == p
        if full.any():
            xf = x[full]
            xtx = np.einsum("bni,bnj->bij", xf, xf)
            xty = np.einsum("bni,n->bi", xf, self.y)
            beta = np.linalg.solve(xtx, xty[..., None])[..., 0]
            out[full] = self.y - np.einsum("bni,bi->bn", xf, beta)
        return out

    def evaluate(self, w: np.ndarray) -> np.ndarray:
        if self.n_cond < 2:
            return np.full(w.shape[0], np.nan)
        r = self.residuals(w)[:, self.cond]
        r = r - r.mean(axis=1, keepdims=True)
        e = (self.exposure @ w.T).T
        return np.einsum("bn,bn->b", r, e) / (self.n_cond - 1)


class HasTreatedNeighbor(_Prepared):
    """Correlation of focal outcomes with having a treated auxiliary neighbor."""

    def __init__(self, focal: np.ndarray, y: np.ndarray, adj: sp.spmatrix, alter: np.ndarray):
        self.y = y[focal]
        self.m = sp.csr_matrix(sp.csr_matrix(adj)[focal] @ sp.diags(alter))
        yc = self.y - self.y.mean()
        self.yc = yc
        self.sy = np.sqrt(np.mean(yc**2))

    def evaluate(self, w: np.ndarray) -> np.ndarray:
        ind = ((self.m @ w.T).T > 0).astype(np.float64)
        mu = ind.mean(axis=1, keepdims=True)
        st = np.sqrt(np.mean((ind - mu) ** 2, axis=1))
        cov = (ind - mu) @ self.yc / self.yc.size
        out = np.full(w.shape[0], np.nan)
        ok = (st > 0) & (self.sy > 0)
        out[ok] = cov[ok] / (st[ok] * self.sy)
        return out


class DirectDifference(_Prepared):
    """Treated-minus-control mean outcome among focal units."""

    def __init__(self, focal: np.ndarray, y: np.ndarray):
        self.focal = focal
        self.y = y[focal]
        self.total = self.y.sum()

    def evaluate(self, w: np.ndarray) -> np.ndarray:
        wf = w[:, self.focal]
        n1 = wf.sum(axis=1)
        n0 = self.focal.size - n1
        t1 = wf @ self.y
        out = np.full(w.shape[0], np.nan)
        ok = (n1 > 0) & (n0 > 0)
        out[ok] = t1[ok] / n1[ok] - (self.total - t1[ok]) / n0[ok]
        return out


def _degree_weighted(net) -> sp.csr_matrix:
    a = net.adjacency
    return sp.csr_matrix(a @ sp.diags(net.degree.astype(np.float64)))


def prepare(stat, part: FocalPartition, y: OutcomeData, nets, order: int = 2) -> _Prepared:
    """Build the evaluator for ``stat``; ``order`` sets the distance for the
    higher-order statistics (2 compares neighbors of neighbors)."""
    stat = parse_statistic(stat)
    kind = stat.kind
    yv = y.y if isinstance(y, OutcomeData) else np.asarray(y, dtype=np.float64)
    n = nets.n
    if yv.shape != (n,):
        raise DataError(f"outcome vector has length {yv.size}, expected {n}")
    g = base_network(nets)
    focal = np.asarray(part.focal, dtype=np.int64)
    ego = part.indicator("focal")
    aux = part.indicator("auxiliary")
    if kind == "bond":
        OutcomeData(yv).require(np.arange(n))
        ones = np.ones(n)
        return EdgeContrast(g.adjacency, ones, ones, yv)
    OutcomeData(yv).require(focal)
    if kind in NEEDS_PAIR and not isinstance(nets, NetworkPair):
        raise IncompatibleStatisticError(f"statistic {kind!r} needs two networks")
    if kind == "elc":
        return EdgeContrast(g.adjacency, ego, aux, yv)
    if kind == "elc-ho":
        return EdgeContrast(distance_ring(g, order), ego, aux, yv)
    if kind == "elc-cn":
        return EdgeContrast(nets.g2.adjacency, ego, aux, yv)
    if kind == "htn":
        return HasTreatedNeighbor(focal, yv, g.adjacency, 1.0 - ego)
    if kind == "direct-diff":
        return DirectDifference(focal, yv)

    gbar = row_normalize(g.adjacency)
    if kind == "score":
        extra, expo = [], gbar
        cond = g.degree[focal] > 0
    elif kind == "score-ho":
        extra = [row_normalize(distance_ring(g, t)) for t in range(1, order)]
        ring = distance_ring(g, order)
        expo = row_normalize(ring)
        cond = np.asarray(ring.sum(axis=1)).ravel()[focal] > 0
    elif kind == "score-cn":
        g2 = nets.g2
        extra, expo = [gbar], row_normalize(g2.adjacency)
        cond = g2.degree[focal] > 0
    else:  # score-het
        kw = _degree_weighted(g)
        extra, expo = [gbar], row_normalize(kw)
        cond = np.asarray(kw.sum(axis=1)).ravel()[focal] > 0
    return ScoreCovariance(focal, yv, extra, expo, cond)


def statistic_order(h: NullHypothesis) -> int:
    return h.k if h.kind == "no-korder" and h.k >= 2 else 2


# ---------------------------------------------------------------------------
# single-assignment conveniences


def _single(kind, part, w, y, nets, order=2) -> float:
    return float(prepare(StatisticSpec(kind), part, y, nets, order)(np.asarray(w, dtype=np.float64)))


def t_elc(part, w, y, nets):
    return _single("elc", part, w, y, nets)


def t_score(part, w, y, nets):
    return _single("score", part, w, y, nets)


def t_htn(part, w, y, nets):
    return _single("htn", part, w, y, nets)


def t_elc_ho(part, w, y, nets, order=2):
    return _single("elc-ho", part, w, y, nets, order)


def t_score_ho(part, w, y, nets, order=2):
    return _single("score-ho", part, w, y, nets, order)


def t_elc_cn(part, w, y, nets):
    return _single("elc-cn", part, w, y, nets)


def t_score_cn(part, w, y, nets):
    return _single("score-cn", part, w, y, nets)


def t_score_het(part, w, y, nets):
    return _single("score-het", part, w, y, nets)


def t_bond(part, w, y, nets):
    return _single("bond", part, w, y, nets)


def t_direct_diff(part, w, y, nets):
    return _single("direct-diff", part, w, y, nets)
