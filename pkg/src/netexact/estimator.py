"""Estimator-style front end to focal selection and the randomization test."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_consistent_length, check_is_fitted

from .design import parse_design
from .engine import resolve_seed, run_test
from .exceptions import ConfigError
from .focal import partition, resolve_selector, select_focal
from .hypotheses import parse_hypothesis
from .netgraph import Network, NetworkPair
from .stats import OutcomeData, check_compatible, parse_statistic


def _nets(network, network2=None):
    if isinstance(network, NetworkPair):
        return network
    if not isinstance(network, Network):
        raise ConfigError(f"expected a Network, got {type(network).__name__}")
    return network if network2 is None else NetworkPair(network, network2)


class FocalSelector(BaseEstimator):
    """Choose focal units from the network alone.

    Parameters
    ----------
    selector : str
        Selector string, e.g. ``"eps-net:eps=2"`` or ``"greedy-delta"``.
    random_state : int or None
        Seed for random selection and tie-breaking.

    Attributes
    ----------
    focal_ : ndarray of int
    """

    def __init__(self, selector="eps-net", random_state=None):
        self.selector = selector
        self.random_state = random_state

    def fit(self, network, network2=None, eligible=None):
        nets = _nets(network, network2)
        self.focal_ = select_focal(self.selector, nets, seed=self.random_state, eligible=eligible)
        self.n_focal_ = int(self.focal_.size)
        return self


class NetworkRandomizationTest(BaseEstimator):
    """Conditional randomization test of an interference hypothesis.

    Parameters
    ----------
    hypothesis : str
        ``"no-spillovers"``, ``"no-korder:k=2"``, ``"sparsification"``, ...
    statistic : str
        ``"score"``, ``"elc"``, ``"htn"``, ... optionally ``":degenerate=zero"``.
    selector : str
        Focal selector; ``"greedy"`` picks the one matching the hypothesis.
        Ignored when ``focal`` is given.
    design : str
        ``"complete"`` (treated count taken from the data), ``"complete:M=300"``
        or ``"cluster:Mc=20"``.
    b_draws : int
    random_state : int or None
        Seeds focal selection and the randomization draws.
    add_one : bool
    n_threads : int
    focal : array-like of int or None
        Fixed focal units.

    Attributes
    ----------
    focal_ : ndarray
    partition_ : FocalPartition
    result_ : TestResult
    statistic_ : float
    pvalue_ : float
        ``result_.p_abs``.
    """

    def __init__(self, hypothesis="no-spillovers", statistic="score", selector="greedy", design="complete",
                 b_draws=1000, random_state=None, add_one=False, n_threads=1, focal=None):
        self.hypothesis = hypothesis
        self.statistic = statistic
        self.selector = selector
        self.design = design
        self.b_draws = b_draws
        self.random_state = random_state
        self.add_one = add_one
        self.n_threads = n_threads
        self.focal = focal

    def _validate_params(self, nets):
        if int(self.b_draws) < 1:
            raise ConfigError("b_draws must be >= 1")
        if int(self.n_threads) < 1:
            raise ConfigError("n_threads must be >= 1")
        h = parse_hypothesis(self.hypothesis)
        stat = parse_statistic(self.statistic)
        check_compatible(stat, h, nets)
        return h, stat

    def fit(self, w, y, network, network2=None, clusters=None, eligible=None):
        """Run the test on treatments ``w`` and outcomes ``y`` (NaN = unobserved)."""
        nets = _nets(network, network2)
        w = np.asarray(w)
        y = np.asarray(y, dtype=np.float64)
        check_consistent_length(w, y)
        if w.shape[0] != nets.n:
            raise ConfigError(f"{w.shape[0]} treatments for a network of {nets.n} units")
        h, stat = self._validate_params(nets)
        seed = resolve_seed(self.random_state)
        if self.focal is not None:
            focal = np.unique(np.asarray(self.focal, dtype=np.int64))
        else:
            spec = resolve_selector(self.selector, h)
            if eligible is None:
                eligible = ~np.isnan(y)
            focal = select_focal(spec, nets, seed=seed, eligible=eligible)
        design = parse_design(self.design, nets.n, clusters)
        self.focal_ = focal
        self.partition_ = partition(h, nets, focal)
        self.result_ = run_test(nets, OutcomeData(y), w, design, h, focal, stat, int(self.b_draws), seed,
                                add_one=self.add_one, threads=int(self.n_threads))
        self.statistic_ = self.result_.t_obs
        self.pvalue_ = self.result_.p_abs
        return self

    def summary(self) -> str:
        check_is_fitted(self, "result_")
        return f"{self.hypothesis} / {self.statistic}: n_focal={self.focal_.size}  {self.result_.summary()}"
