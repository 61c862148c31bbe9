import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

import netexact
from netexact import FocalSelector, NetworkRandomizationTest
from netexact.design import CompleteRandomization, sample
from netexact.engine import run_test
from netexact.exceptions import ConfigError, FocalOutcomeMissingError, IncompatibleStatisticError
from netexact.focal import select_focal
from netexact.netgraph import Network, NetworkPair, dyad_network, sparsify, watts_strogatz


@pytest.fixture
def data():
    net = watts_strogatz(80, 4, 0.1, seed=0)
    w = sample(CompleteRandomization(80, 40), seed=1)
    y = np.random.default_rng(2).normal(size=80) + 2 * w
    return net, w, y


def test_params_round_trip():
    est = NetworkRandomizationTest(hypothesis="no-korder:k=2", statistic="score-ho", b_draws=50)
    assert est.get_params()["hypothesis"] == "no-korder:k=2"
    c = clone(est)
    assert c.get_params() == est.get_params()
    est.set_params(b_draws=20)
    assert est.b_draws == 20


def test_fit_matches_functional_api(data):
    net, w, y = data
    est = NetworkRandomizationTest(selector="eps-net", b_draws=300, random_state=7).fit(w, y, net)
    focal = select_focal("eps-net", net, seed=7)
    assert np.array_equal(est.focal_, focal)
    ref = run_test(net, y, w, CompleteRandomization(80, 40), "no-spillovers", focal, "score", 300, seed=7)
    assert est.result_ == ref
    assert est.pvalue_ == ref.p_abs and est.statistic_ == ref.t_obs
    assert "p_abs" in est.summary()


def test_fixed_focal_and_eligibility(data):
    net, w, y = data
    est = NetworkRandomizationTest(focal=[3, 1, 1, 20], b_draws=50, random_state=0, statistic="elc")
    est.fit(w, y, net)
    assert est.focal_.tolist() == [1, 3, 20]
    y_missing = y.copy()
    y_missing[::2] = np.nan
    est = NetworkRandomizationTest(selector="eps-net", b_draws=50, random_state=0).fit(w, y_missing, net)
    assert (est.focal_ % 2 == 1).all()
    with pytest.raises(FocalOutcomeMissingError):
        NetworkRandomizationTest(focal=[0, 1], b_draws=10, random_state=0).fit(w, y_missing, net)


def test_invalid_configuration(data):
    net, w, y = data
    with pytest.raises(IncompatibleStatisticError):
        NetworkRandomizationTest(statistic="score-ho").fit(w, y, net)
    with pytest.raises(ConfigError):
        NetworkRandomizationTest(b_draws=0).fit(w, y, net)
    with pytest.raises(ConfigError):
        NetworkRandomizationTest().fit(w[:10], y[:10], net)
    with pytest.raises(NotFittedError):
        NetworkRandomizationTest().summary()


def test_pair_and_selector():
    g2 = watts_strogatz(80, 6, 0.1, seed=1)
    g1 = sparsify(g2, 0.5, seed=2)
    w = sample(CompleteRandomization(80, 40), seed=3)
    y = np.random.default_rng(0).normal(size=80)
    est = NetworkRandomizationTest("sparsification", "score-cn", b_draws=100, random_state=1)
    est.fit(w, y, g1, g2)
    assert 0 <= est.pvalue_ <= 1
    sel = FocalSelector("greedy-cn", random_state=0).fit(NetworkPair(g1, g2))
    assert sel.n_focal_ == sel.focal_.size > 0
    sel = FocalSelector("eps-net", random_state=0).fit(dyad_network(10))
    assert sel.n_focal_ == 10
    with pytest.raises(ConfigError):
        FocalSelector().fit("not a network")


def test_cluster_design():
    net = watts_strogatz(60, 4, 0.1, seed=0)
    clusters = np.repeat(np.arange(20), 3)
    w = np.repeat(sample(CompleteRandomization(20, 10), seed=4), 3)
    y = np.random.default_rng(1).normal(size=60)
    est = NetworkRandomizationTest(design="cluster", statistic="elc", selector="random:frac=0.1", b_draws=100,
                                   random_state=3)
    est.fit(w, y, net, clusters=clusters)
    assert est.result_.b_draws == 100


def test_top_level_exports():
    for name in netexact.__all__:
        assert hasattr(netexact, name)
    assert isinstance(netexact.Network(2, [(0, 1)]), Network)
