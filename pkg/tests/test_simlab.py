import csv
import io
import json
import math

import numpy as np
import pytest
from scipy import stats as sps

from netexact.exceptions import ConfigError
from netexact.netgraph import Network, NetworkPair, load_surrogate, watts_strogatz
from netexact.simlab import (
    _one_rep_appendix_a,
    CSV_FIELDS,
    PRESETS,
    network_source,
    provenance,
    rows_to_csv,
    run_appendix_a,
    run_grid,
    run_setup_one,
    run_setup_two,
    setup_one_outcomes,
    setup_two_outcomes,
)


def test_setup_one_outcomes():
    net = Network(4, [(0, 1), (0, 2), (0, 3)])
    w = np.array([0.0, 1.0, 1.0, 0.0])
    y0 = np.array([0.5, 0.0, 0.0, 0.0])
    y = setup_one_outcomes(net, w, 4.0, 0.3, y0)
    assert y.tolist() == pytest.approx([0.5 + 0.3 * 2 / 3, 4.0, 4.0, 0.0])


def test_setup_two_outcomes():
    g2 = Network(3, [(0, 1), (0, 2)])
    g1 = Network(3, [(0, 1)])
    w = np.array([0.0, 0.0, 1.0])
    eps = np.zeros(3)
    pair = NetworkPair(g1, g2)
    # lam = 0: only the g1 neighbor counts
    assert setup_two_outcomes(pair, w, 0.0, 1.0, 0.0, eps)[0] == 0.0
    # lam = 1: both neighbors count equally
    assert setup_two_outcomes(pair, w, 0.0, 1.0, 1.0, eps)[0] == pytest.approx(0.5)
    # lam = 0.5: the g2-only neighbor has half weight
    assert setup_two_outcomes(pair, w, 2.0, 1.0, 0.5, eps)[0] == pytest.approx(0.5 / 1.5)
    assert setup_two_outcomes(pair, w, 2.0, 1.0, 0.5, eps)[2] == pytest.approx(2.0 + 0.0)


def test_network_sources(tmp_path):
    f, fixed = network_source("ws:n=30,k=4,p=0.1")
    assert not fixed and f(1) == watts_strogatz(30, 4, 0.1, seed=1) and f(1) != f(2)
    f, fixed = network_source("ws:n=30,k=4,p=0.1,fixed=1")
    assert fixed
    f, fixed = network_source("surrogate")
    assert fixed and f(0) == load_surrogate()
    p = tmp_path / "g.edges"
    p.write_text("0 1\n1 2\n")
    f, fixed = network_source(str(p))
    assert fixed and f(5).n == 3
    with pytest.raises(ConfigError):
        network_source("ws:n=30,q=1")


def test_setup_one_reproducible_and_parallel_invariant():
    kw = dict(network="ws:n=60,k=4,p=0.1", stat="score", selector="eps-net", tau_direct=1.0, tau_spill=0.0,
              reps=12, b_draws=100, seed=5)
    a = run_setup_one(**kw)
    b = run_setup_one(**kw, n_jobs=2)
    assert np.array_equal(a.pvalues, b.pvalues)
    assert a.rejection_rate == b.rejection_rate
    assert a.replications == 12 and 0 <= a.rejection_rate <= 1
    # replication r only depends on (seed, r)
    c = run_setup_one(**dict(kw, reps=6))
    assert np.array_equal(c.pvalues, a.pvalues[:6])
    assert a.design["M"] == 30 and a.design["selector"] == "eps-net"


def test_setup_one_defaults_to_half_treated():
    r = run_setup_one(network="ws:n=21,k=4,p=0.1", selector="random", reps=2, b_draws=20)
    assert r.design["M"] == 11


def test_setup_one_size_small_scale():
    r = run_setup_one(network="ws:n=100,k=6,p=0.1", stat="elc", selector="eps-net", tau_direct=4.0,
                      tau_spill=0.0, reps=300, b_draws=200, seed=1)
    assert abs(r.rejection_rate - 0.05) <= 3 * math.sqrt(0.05 * 0.95 / 300)
    assert r.mc_se == pytest.approx(math.sqrt(r.rejection_rate * (1 - r.rejection_rate) / 300))


def test_setup_one_detects_large_spillovers():
    r = run_setup_one(network="ws:n=100,k=6,p=0.1", stat="score", selector="greedy", tau_direct=0.0,
                      tau_spill=3.0, reps=40, b_draws=200, seed=2)
    assert r.rejection_rate > 0.5


def test_setup_two_runs_and_validates():
    r = run_setup_two(network="ws:n=80,k=6,p=0.1", q=0.5, lam=0.0, stat="score-cn", reps=10, b_draws=50, seed=3)
    assert r.replications == 10 and r.design["hypothesis"] == "sparsification"
    assert r.design["selector"] == "greedy-cn"
    with pytest.raises(ConfigError):
        run_setup_two(stat="score", reps=1)


def test_appendix_a_small():
    naive, valid, ratio = run_appendix_a(n_pairs=100, reps=60, b_draws=200, seed=0)
    assert naive.replications == valid.replications == 60
    assert valid.mean_focal == 100
    assert naive.design["arm"] == "naive" and valid.design["arm"] == "valid"
    assert ratio > 1.3
    with pytest.raises(ConfigError):
        run_appendix_a(n_pairs=1)


def test_zero_reps():
    r = run_setup_one(network="ws:n=20,k=4,p=0.1", reps=0, b_draws=10)
    assert r.replications == 0 and math.isnan(r.rejection_rate)
    rows = run_grid({"setup": "one", "network": "ws:n=20,k=4,p=0.1", "reps": 0})
    text = rows_to_csv(rows)
    assert text.splitlines()[0] == ",".join(CSV_FIELDS)


def test_grid_rows_and_csv():
    rows = run_grid({"setup": "one", "network": "ws:n=40,k=4,p=0.1", "stat": ["elc", "score"],
                     "selector": "eps-net", "tau_spill": [0.0], "reps": 3, "b_draws": 20, "seed": 1})
    assert [r["statistic"] for r in rows] == ["elc", "score"]
    parsed = list(csv.DictReader(io.StringIO(rows_to_csv(rows))))
    assert len(parsed) == 2 and parsed[0]["replications"] == "3"
    with pytest.raises(ConfigError):
        run_grid({"setup": "one", "bogus": 1})
    with pytest.raises(ConfigError):
        run_grid({"preset": "nope"})
    with pytest.raises(ConfigError):
        run_grid({"setup": "three"})


def test_presets_are_well_formed():
    assert set(PRESETS) == {"setup-one", "setup-two", "appendix-a"}
    for name in PRESETS:
        # zero replications exercises parsing of every grid cell cheaply
        rows = run_grid({"preset": name, "reps": 0})
        assert rows
    assert len(run_grid({"preset": "setup-one", "reps": 0})) == 3 * 3 * 2 * 2


def test_provenance():
    doc = provenance({"setup": "one"})
    assert doc["config"] == {"setup": "one"}
    assert {"netexact", "numpy", "scipy", "python"} <= set(doc["versions"])
    json.dumps(doc)


def test_appendix_a_naive_pvalues_match_exact_tail():
    # with Y = W the naive null law of the statistic is 2 H / N - 1, H hypergeometric
    n = 100
    h = np.arange(n + 1)
    t_null = np.abs(2 * h / n - 1)
    p_h = sps.hypergeom(2 * n, n, n).pmf(h)
    diffs = []
    for r in range(150):
        p_naive, _, t_obs, var_null, _ = _one_rep_appendix_a(r, 3, n, 400)
        q = p_h[t_null >= abs(t_obs) - 1e-12].sum()
        diffs.append(p_naive - q)
        assert var_null == pytest.approx(np.sum(p_h * (2 * h / n - 1) ** 2), rel=0.25)
    diffs = np.asarray(diffs)
    assert abs(diffs.mean()) < 4 * diffs.std() / math.sqrt(diffs.size)
