import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netexact.exceptions import ConfigError, FocalOutcomeMissingError, IncompatibleStatisticError
from netexact.focal import partition
from netexact.hypotheses import NoKthOrder, NullHypothesis, parse_hypothesis
from netexact.netgraph import Network, NetworkPair, dyad_network, watts_strogatz
from netexact.stats import (
    STATISTICS,
    OutcomeData,
    check_compatible,
    parse_statistic,
    prepare,
    t_bond,
    t_direct_diff,
    t_elc,
    t_elc_cn,
    t_elc_ho,
    t_htn,
    t_score,
    t_score_het,
    t_score_ho,
)

from oracles import naive_statistic

NS = NullHypothesis("no-spillovers")

# hypothesis under which each statistic is evaluated in the oracle comparison
HOME = {
    "elc": "no-spillovers",
    "score": "no-spillovers",
    "htn": "no-spillovers",
    "elc-ho": "no-korder:k=2",
    "score-ho": "no-korder:k=2",
    "elc-cn": "sparsification",
    "score-cn": "sparsification",
    "score-het": "no-heterogeneity",
    "bond": "no-effects",
    "direct-diff": "no-direct",
}


def close(a, b, tol=1e-12):
    if math.isnan(a) or math.isnan(b):
        return math.isnan(a) and math.isnan(b)
    return math.isclose(a, b, rel_tol=tol, abs_tol=tol)


@st.composite
def instances(draw, max_n=12):
    n = draw(st.integers(4, max_n))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    e1 = draw(st.lists(st.sampled_from(pairs), unique=True, min_size=n // 2))
    extra = draw(st.lists(st.sampled_from(pairs), unique=True))
    focal = draw(st.lists(st.integers(0, n - 1), min_size=2, max_size=n - 1, unique=True))
    w = draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    y = draw(st.lists(st.floats(-5, 5, allow_nan=False, width=32), min_size=n, max_size=n))
    return Network(n, e1), Network(n, sorted(set(e1) | set(extra))), sorted(focal), w, y


def _evaluate(kind, hyp, g1, g2, focal, w, y, order=2):
    h = parse_hypothesis(hyp)
    nets = NetworkPair(g1, g2) if h.needs_pair else g1
    part = partition(h, nets, focal)
    ev = prepare(kind, part, OutcomeData(np.asarray(y, float)), nets, order)
    return float(ev(np.asarray(w, float))), part


@pytest.mark.parametrize("kind", STATISTICS)
@settings(max_examples=60, deadline=None)
@given(inst=instances())
def test_statistic_matches_naive_oracle(kind, inst):
    g1, g2, focal, w, y = inst
    got, part = _evaluate(kind, HOME[kind], g1, g2, focal, w, y)
    want = naive_statistic(kind, g1, g2, part.focal.tolist(), part.auxiliary.tolist(), y, w)
    assert close(got, want), (got, want)


@pytest.mark.parametrize("order", [3, 4])
@settings(max_examples=40, deadline=None)
@given(inst=instances())
def test_higher_order_statistics_at_larger_distance(order, inst):
    g1, g2, focal, w, y = inst
    for kind in ("elc-ho", "score-ho"):
        got, part = _evaluate(kind, f"no-korder:k={order}", g1, g2, focal, w, y, order)
        want = naive_statistic(kind, g1, g2, part.focal.tolist(), part.auxiliary.tolist(), y, w, order)
        assert close(got, want), (kind, got, want)


@pytest.mark.parametrize("kind", STATISTICS)
def test_batch_equals_rowwise(kind):
    rng = np.random.default_rng(3)
    g1 = watts_strogatz(30, 4, 0.3, seed=1)
    g2 = Network(30, np.vstack([g1.edges, watts_strogatz(30, 2, 1.0, seed=2).edges]))
    h = parse_hypothesis(HOME[kind])
    nets = NetworkPair(g1, g2) if h.needs_pair else g1
    part = partition(h, nets, rng.choice(30, 8, replace=False))
    ev = prepare(kind, part, OutcomeData(rng.normal(size=30)), nets)
    W = (rng.random((40, 30)) < 0.5).astype(float)
    batch = ev.evaluate(W)
    for b in range(W.shape[0]):
        assert close(batch[b], float(ev(W[b])), 1e-10)


# ---------------------------------------------------------------------------
# worked examples

DY = dyad_network(2)


def test_elc_examples():
    part = partition(NS, DY, [0, 2])
    y = np.array([2.0, np.nan, 1.0, np.nan])
    assert t_elc(part, [0, 1, 0, 0], y, DY) == 1.0
    assert math.isnan(t_elc(part, [0, 1, 0, 1], y, DY))


def test_score_constant_outcome():
    net = watts_strogatz(20, 4, 0.2, seed=0)
    part = partition(NS, net, [0, 3, 7, 11, 15])
    w = np.r_[np.ones(10), np.zeros(10)][np.random.default_rng(0).permutation(20)]
    assert t_score(part, w, np.full(20, 3.0), net) == pytest.approx(0.0, abs=1e-14)


def test_htn_examples():
    part = partition(NS, DY, [0, 2])
    assert t_htn(part, [0, 1, 0, 0], np.array([1.0, 0, 0.0, 0]), DY) == pytest.approx(1.0)
    assert math.isnan(t_htn(part, [0, 1, 0, 1], np.array([1.0, 0, 0.0, 0]), DY))


def test_elc_ho_examples():
    path = Network(3, [(0, 1), (1, 2)])
    part = partition(NoKthOrder(2), path, [0])
    assert part.buffer.tolist() == [1] and part.auxiliary.tolist() == [2]
    assert math.isnan(t_elc_ho(part, [0, 0, 1], np.zeros(3), path))
    dpart = partition(NoKthOrder(2), DY, [0, 2])
    assert math.isnan(t_elc_ho(dpart, [1, 0, 0, 1], np.zeros(4), DY))


def test_score_ho_exact_fit_and_dyads():
    net = watts_strogatz(40, 4, 0.3, seed=2)
    rng = np.random.default_rng(1)
    focal = np.arange(0, 40, 5)
    part = partition(NoKthOrder(2), net, focal)
    w = (rng.random(40) < 0.5).astype(float)
    frac = np.asarray(net.adjacency @ w).ravel() / net.degree
    y = 1.0 + 2.0 * w + 0.7 * frac
    assert abs(t_score_ho(part, w, y, net)) < 1e-12
    assert math.isnan(t_score_ho(partition(NoKthOrder(2), DY, [0, 2]), [1, 0, 0, 1], np.zeros(4), DY))


def test_elc_cn_identical_networks():
    net = watts_strogatz(20, 4, 0.2, seed=0)
    pair = NetworkPair(net, net)
    part = partition(NullHypothesis("sparsification"), pair, [0, 5, 10])
    w = np.arange(20) % 2
    assert math.isnan(t_elc_cn(part, w, np.arange(20.0), pair))


def test_score_het_regular_and_single_focal():
    net = Network(12, [(i, (i + 1) % 12) for i in range(12)])
    h = NullHypothesis("no-heterogeneity")
    part = partition(h, net, [0, 3, 6, 9, 1, 7])
    rng = np.random.default_rng(5)
    w = np.array([1, 1, 0, 0, 1, 0, 1, 0, 0, 1, 1, 0], dtype=float)
    # regular graph: the exposure is the plain fraction, which is a regressor
    assert abs(t_score_het(part, w, rng.normal(size=12), net)) < 1e-12
    assert math.isnan(t_score_het(partition(h, net, [0]), w, rng.normal(size=12), net))


def test_bond_appendix_formula():
    n_pairs = 50
    net = dyad_network(n_pairs)
    part = partition(NullHypothesis("no-effects"), net, np.arange(2 * n_pairs))
    rng = np.random.default_rng(0)
    for _ in range(20):
        w = np.zeros(2 * n_pairs)
        w[rng.choice(2 * n_pairs, n_pairs, replace=False)] = 1
        m = int(sum(w[2 * p] * w[2 * p + 1] for p in range(n_pairs)))
        assert t_bond(part, w, w, net) == pytest.approx(4 * (m / n_pairs - 0.25), abs=1e-12)
    assert t_bond(part, w, np.full(2 * n_pairs, 2.0), net) == 0.0


def test_direct_diff_examples():
    net = Network(2)
    part = partition(NullHypothesis("no-direct"), net, [0, 1])
    assert t_direct_diff(part, [1, 0], np.array([1.0, 0.0]), net) == 1.0
    assert t_direct_diff(part, [1, 0], np.array([4.0, 4.0]), net) == 0.0


# ---------------------------------------------------------------------------
# contracts


@pytest.mark.parametrize("kind", [k for k in STATISTICS if k != "bond"])
@settings(max_examples=30, deadline=None)
@given(inst=instances(), noise=st.lists(st.floats(-100, 100, allow_nan=False), min_size=12, max_size=12))
def test_non_focal_outcomes_never_matter(kind, inst, noise):
    g1, g2, focal, w, y = inst
    a, part = _evaluate(kind, HOME[kind], g1, g2, focal, w, y)
    y2 = np.array(y, float)
    others = np.setdiff1d(np.arange(g1.n), part.focal)
    y2[others] = np.asarray(noise[: others.size])
    b, _ = _evaluate(kind, HOME[kind], g1, g2, focal, w, y2)
    y2[others] = np.nan
    c, _ = _evaluate(kind, HOME[kind], g1, g2, focal, w, y2)
    assert close(a, b) and close(a, c)


@pytest.mark.parametrize("kind", STATISTICS)
def test_affine_outcome_transform(kind):
    rng = np.random.default_rng(11)
    g1 = watts_strogatz(30, 4, 0.3, seed=4)
    g2 = Network(30, np.vstack([g1.edges, watts_strogatz(30, 2, 1.0, seed=5).edges]))
    h = parse_hypothesis(HOME[kind])
    nets = NetworkPair(g1, g2) if h.needs_pair else g1
    part = partition(h, nets, rng.choice(30, 10, replace=False))
    y = rng.normal(size=30)
    W = (rng.random((20, 30)) < 0.5).astype(float)
    base = prepare(kind, part, OutcomeData(y), nets).evaluate(W)
    moved = prepare(kind, part, OutcomeData(2.5 * y - 7.0), nets).evaluate(W)
    ok = ~np.isnan(base)
    assert ok.any()
    expect = base if kind == "htn" else 2.5 * base
    assert np.allclose(moved[ok], expect[ok], rtol=1e-9, atol=1e-9)


def test_missing_focal_outcome():
    part = partition(NS, DY, [0, 2])
    with pytest.raises(FocalOutcomeMissingError):
        prepare("elc", part, OutcomeData(np.array([1.0, 0.0, np.nan, 0.0])), DY)
    with pytest.raises(FocalOutcomeMissingError):
        prepare("bond", part, OutcomeData(np.array([1.0, np.nan, 1.0, 0.0])), DY)


def test_parse_and_compatibility():
    s = parse_statistic("elc:degenerate=zero")
    assert s.kind == "elc" and s.degenerate == "zero"
    assert parse_statistic("score").degenerate == "skip"
    for bad in ("nope", "elc:degenerate=maybe", "elc:x=1"):
        with pytest.raises(ConfigError):
            parse_statistic(bad)
    net = Network(4)
    with pytest.raises(IncompatibleStatisticError):
        check_compatible(parse_statistic("elc"), NoKthOrder(2), net)
    with pytest.raises(IncompatibleStatisticError):
        check_compatible(parse_statistic("bond"), NS, net)
    with pytest.raises(IncompatibleStatisticError):
        check_compatible(parse_statistic("score-cn"), NullHypothesis("no-effects"), net)
    check_compatible(parse_statistic("score"), NullHypothesis("no-effects"), net)
    check_compatible(parse_statistic("score-ho"), NoKthOrder(3), net)
