"""Assignment mechanisms and conditional samplers over restricted assignment sets.

The conditional sampler works on *blocks*: single units under complete
randomization, whole clusters under cluster randomization. Blocks touching a
constrained unit are pinned to their observed arm. The remaining blocks are
split into groups and the observed treatments are permuted uniformly within
each group. For fixed-unit hypotheses there is a single group; for the
count-preserving hypotheses blocks are grouped by how they touch the focal
units, so every focal unit keeps its treated-neighbor count.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from sklearn.utils import check_random_state

from .exceptions import ConfigError, DataError, DegenerateSamplerError, SupportTooLargeError
from .hypotheses import NullHypothesis, base_network, constrained_units
from .specstr import ensure_consumed, parse_spec, take

DEFAULT_SUPPORT_CAP = 10**6


@dataclass(frozen=True)
class CompleteRandomization:
    """``M`` of ``n`` units treated, uniformly over all such subsets.

    ``M=None`` defers the count to the observed assignment.
    """

    n: int
    M: int | None = None

    def __post_init__(self):
        if self.n < 0 or (self.M is not None and not 0 <= self.M <= self.n):
            raise ConfigError(f"need 0 <= M <= n, got n={self.n}, M={self.M}")

    @property
    def block_labels(self) -> np.ndarray:
        return np.arange(self.n)

    @property
    def n_blocks(self) -> int:
        return self.n

    def treated_blocks(self) -> int | None:
        return self.M

    def __str__(self):
        return "complete" if self.M is None else f"complete:M={self.M}"


@dataclass(frozen=True, eq=False)
class ClusterRandomization:
    """``Mc`` of the clusters treated; every unit of a treated cluster is treated."""

    labels: np.ndarray
    Mc: int | None = None
    _codes: np.ndarray = field(init=False, repr=False)
    _k: int = field(init=False, repr=False)

    def __post_init__(self):
        labels = np.asarray(self.labels)
        _, codes = np.unique(labels, return_inverse=True)
        codes = codes.astype(np.int64).ravel()
        codes.setflags(write=False)
        k = int(codes.max()) + 1 if codes.size else 0
        object.__setattr__(self, "_codes", codes)
        object.__setattr__(self, "_k", k)
        if self.Mc is not None and not 0 <= self.Mc <= k:
            raise ConfigError(f"need 0 <= Mc <= {k} clusters, got {self.Mc}")

    @property
    def n(self) -> int:
        return self._codes.size

    @property
    def block_labels(self) -> np.ndarray:
        return self._codes

    @property
    def n_blocks(self) -> int:
        return self._k

    def treated_blocks(self) -> int | None:
        return self.Mc

    def __str__(self):
        return "cluster" if self.Mc is None else f"cluster:Mc={self.Mc}"


def parse_design(text: str, n: int, clusters=None):
    """Parse ``"complete:M=300"`` or ``"cluster:Mc=20"``."""
    if isinstance(text, (CompleteRandomization, ClusterRandomization)):
        return text
    name, opts = parse_spec(text)
    if name == "complete":
        M = take(opts, "M", int, source=text)
        ensure_consumed(opts, text)
        return CompleteRandomization(int(n), M)
    if name == "cluster":
        Mc = take(opts, "Mc", int, source=text)
        ensure_consumed(opts, text)
        if clusters is None:
            raise ConfigError("cluster design needs cluster labels (a 'cluster' column in the node table)")
        if len(clusters) != n:
            raise ConfigError(f"{len(clusters)} cluster labels for {n} units")
        return ClusterRandomization(np.asarray(clusters), Mc)
    raise ConfigError(f"unknown design {name!r}")


def sample(design, seed=None) -> np.ndarray:
    """One draw from the unconditional assignment mechanism."""
    m = design.treated_blocks()
    if m is None:
        raise ConfigError(f"{design} does not fix a treated count")
    rng = check_random_state(seed)
    chosen = np.zeros(design.n_blocks, dtype=np.int8)
    chosen[rng.choice(design.n_blocks, size=m, replace=False)] = 1
    return chosen[design.block_labels]


def observed_blocks(design, w_obs) -> np.ndarray:
    """Collapse a unit assignment to block arms, checking it lies in the design support."""
    w = np.asarray(w_obs)
    if w.shape != (design.n,):
        raise DataError(f"assignment has shape {w.shape}, expected ({design.n},)")
    if not np.isin(w, (0, 1)).all():
        raise DataError("treatments must be 0 or 1")
    w = w.astype(np.int8)
    labels = design.block_labels
    blocks = np.zeros(design.n_blocks, dtype=np.int8)
    blocks[labels] = w
    if not np.array_equal(blocks[labels], w):
        raise DataError("treatment varies within a cluster")
    m = design.treated_blocks()
    if m is not None and int(blocks.sum()) != m:
        raise DataError(f"observed assignment treats {int(blocks.sum())} blocks, design says {m}")
    return blocks


def _incidence_groups(net, focal: np.ndarray, labels: np.ndarray, free: np.ndarray) -> list[np.ndarray]:
    # block x focal counts of adjacent members; blocks with equal rows may swap arms
    n_blocks = int(labels.max()) + 1 if labels.size else 0
    member = sp.csr_matrix((np.ones(labels.size), (labels, np.arange(labels.size))), shape=(n_blocks, labels.size))
    agg = (member @ net.adjacency[:, focal]).tocsr()
    agg.sort_indices()
    keys: dict[tuple, list[int]] = {}
    for b in free:
        lo, hi = agg.indptr[b], agg.indptr[b + 1]
        key = (tuple(agg.indices[lo:hi].tolist()), tuple(np.rint(agg.data[lo:hi]).astype(np.int64).tolist()))
        keys.setdefault(key, []).append(int(b))
    return [np.asarray(v, dtype=np.int64) for _, v in sorted(keys.items())]


class ConditionalSampler:
    """Draws from the conditional law over the cell of the observed assignment.

    Parameters
    ----------
    design : CompleteRandomization or ClusterRandomization
    hypothesis : NullHypothesis
    nets : Network or NetworkPair
    focal : array-like of int
    w_obs : array-like of {0, 1}

    Attributes
    ----------
    pinned_ : ndarray
        Blocks held at their observed arm.
    groups_ : list of ndarray
        Free blocks, permuted within each group.
    group_treated_ : ndarray
        Observed treated count per group.
    """

    def __init__(self, design, hypothesis: NullHypothesis, nets, focal, w_obs):
        self.design = design
        self.hypothesis = hypothesis
        self.nets = nets
        self.focal = np.unique(np.asarray(focal, dtype=np.int64))
        blocks = observed_blocks(design, w_obs)
        labels = design.block_labels
        self.w_obs = blocks[labels]
        self.w_obs.setflags(write=False)
        self._labels = labels
        self._obs_blocks = blocks

        fixed_units = constrained_units(hypothesis, nets, self.focal)
        pinned = np.zeros(design.n_blocks, dtype=bool)
        pinned[labels[fixed_units]] = True
        self.pinned_ = np.flatnonzero(pinned)
        free = np.flatnonzero(~pinned)
        if hypothesis.count_preserving and self.focal.size and free.size:
            groups = _incidence_groups(base_network(nets), self.focal, labels, free)
        else:
            groups = [free] if free.size else []
        self.groups_ = groups
        self.group_treated_ = np.array([int(blocks[g].sum()) for g in groups], dtype=np.int64)

    @property
    def n(self) -> int:
        return self.design.n

    def support_size(self) -> int:
        """Exact number of assignments the sampler can emit (a Python int)."""
        out = 1
        for g, m in zip(self.groups_, self.group_treated_):
            out *= math.comb(g.size, int(m))
        return out

    def check_nondegenerate(self) -> None:
        if self.support_size() <= 1:
            raise DegenerateSamplerError(
                "the restricted assignment set holds only the observed assignment"
            )

    def draw_blocks(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """``(size, n_blocks)`` int8 block arms."""
        out = np.broadcast_to(self._obs_blocks, (size, self._obs_blocks.size)).copy()
        rows = np.arange(size)[:, None]
        for g, m in zip(self.groups_, self.group_treated_):
            s = g.size
            if m == 0 or m == s:
                continue
            out[:, g] = 0
            # a uniform m-subset: indices of the m smallest of s iid uniforms
            keys = rng.random((size, s))
            if m <= s - m:
                pick = np.argpartition(keys, m - 1, axis=1)[:, :m]
                out[rows, g[pick]] = 1
            else:
                pick = np.argpartition(keys, s - m - 1, axis=1)[:, : s - m]
                out[:, g] = 1
                out[rows, g[pick]] = 0
        return out

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """``(size, n)`` int8 unit assignments from the conditional law."""
        return self.draw_blocks(rng, size)[:, self._labels]

    def enumerate(self, cap: int = DEFAULT_SUPPORT_CAP):
        """All reachable assignments, as an ``(S, n)`` array with equal masses."""
        size = self.support_size()
        if size > cap:
            raise SupportTooLargeError(f"support has {size} assignments, cap is {cap}")
        per_group = []
        for g, m in zip(self.groups_, self.group_treated_):
            per_group.append([np.asarray(c, dtype=np.int64) for c in itertools.combinations(g.tolist(), int(m))])
        base = self._obs_blocks.copy()
        for g in self.groups_:
            base[g] = 0
        rows = []
        for combo in itertools.product(*per_group):
            b = base.copy()
            for c in combo:
                b[c] = 1
            rows.append(b[self._labels])
        if not rows:
            rows = [base[self._labels]]
        return np.vstack(rows).astype(np.int8), np.full(len(rows), 1.0 / len(rows))

    def __repr__(self):
        return (
            f"ConditionalSampler({self.design}, {self.hypothesis}, n_focal={self.focal.size}, "
            f"pinned={self.pinned_.size}, groups={[g.size for g in self.groups_]})"
        )


def conditional_sample(sampler: ConditionalSampler, seed=None) -> np.ndarray:
    """A single draw from ``sampler``; ``seed`` fixes it completely."""
    return sampler.draw(np.random.default_rng(seed), 1)[0]


def enumerate_conditional(sampler: ConditionalSampler, cap: int = DEFAULT_SUPPORT_CAP):
    """Support of ``sampler`` as a list of ``(assignment, probability)`` pairs."""
    ws, probs = sampler.enumerate(cap)
    return list(zip(ws, probs.tolist()))
