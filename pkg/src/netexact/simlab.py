"""Monte Carlo studies of size and power.

Each replication draws everything it needs (network, assignment, outcomes,
focal set, randomization draws) from its own seed, derived from the study seed
and the replication index, so any subset of replications can be rerun alone
and results never depend on how replications are scheduled.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import platform
from dataclasses import dataclass, field

import numpy as np
import scipy
import sklearn
from joblib import Parallel, delayed

from . import __version__
from .design import CompleteRandomization, sample
from .engine import run_test
from .exceptions import ConfigError, DegenerateSamplerError
from .focal import resolve_selector, select_eps_net, select_focal
from .hypotheses import parse_hypothesis
from .netgraph import (
    Network,
    NetworkPair,
    dyad_network,
    load_surrogate,
    read_edge_list,
    row_normalize,
    sparsify,
    watts_strogatz,
)
from .specstr import ensure_consumed, parse_spec, take


@dataclass
class SimResult:
    design: dict
    replications: int
    rejection_rate: float
    mc_se: float
    degenerate: int = 0
    mean_focal: float = float("nan")
    pvalues: np.ndarray = field(default=None, repr=False, compare=False)

    def row(self) -> dict:
        d = dict(self.design)
        d.update(
            replications=self.replications,
            rejection_rate=self.rejection_rate,
            mc_se=self.mc_se,
            degenerate=self.degenerate,
            mean_focal=self.mean_focal,
        )
        return d


def _summarize(design: dict, pvals: np.ndarray, n_focal: np.ndarray, alpha: float, degenerate=None) -> SimResult:
    reps = pvals.size
    rate = float(np.count_nonzero(pvals <= alpha) / reps) if reps else float("nan")
    se = math.sqrt(rate * (1 - rate) / reps) if reps else float("nan")
    mean_focal = float(np.mean(n_focal)) if reps else float("nan")
    n_degenerate = int(np.sum(degenerate)) if degenerate is not None else 0
    return SimResult(design, reps, rate, se, n_degenerate, mean_focal, pvals)


def replication_seeds(seed: int, rep: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(seed), spawn_key=(int(rep),))


def _int_seed(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1, dtype=np.uint32)[0])


# ---------------------------------------------------------------------------
# network sources


def network_source(spec, n: int = 599):
    """Resolve a network description into ``(factory(seed) -> Network, fixed)``.

    ``spec`` is a ``Network``, a path to an edge list, ``"surrogate"``, or
    ``"ws:n=599,k=10,p=0.1"``. Loaded networks are held fixed across
    replications; generated ones are redrawn unless ``fixed=1`` is given.
    """
    if isinstance(spec, Network):
        return (lambda seed: spec), True
    name, opts = parse_spec(spec)
    if name == "ws":
        nn = take(opts, "n", int, default=n, source=spec)
        k = take(opts, "k", int, default=10, source=spec)
        p = take(opts, "p", float, default=0.1, source=spec)
        fixed = bool(take(opts, "fixed", int, default=0, source=spec))
        ensure_consumed(opts, spec)
        return (lambda seed: watts_strogatz(nn, k, p, seed=seed)), fixed
    if name == "surrogate":
        ensure_consumed(opts, spec)
        net = load_surrogate()
        return (lambda seed: net), True
    net = read_edge_list(spec)
    return (lambda seed: net), True


# ---------------------------------------------------------------------------
# outcome models


def setup_one_outcomes(net: Network, w: np.ndarray, tau_direct: float, tau_spill: float, y0: np.ndarray) -> np.ndarray:
    """Baseline plus additive direct effect plus a share-of-treated-peers spillover."""
    frac = row_normalize(net.adjacency) @ w
    return y0 + tau_direct * w + tau_spill * frac


def setup_two_outcomes(pair: NetworkPair, w: np.ndarray, tau_direct: float, tau_spill: float, lam: float,
                       eps: np.ndarray) -> np.ndarray:
    """Linear-in-means outcomes with G2-only edges down-weighted by ``lam``."""
    g1 = pair.g1.adjacency
    g2 = pair.g2.adjacency
    weights = g1 + lam * (g2 - g1.multiply(g2))
    wbar = row_normalize(weights) @ w
    return tau_direct * w + tau_spill * wbar + eps


# ---------------------------------------------------------------------------
# replications


def _one_rep_setup_one(rep, seed, factory, fixed, stat, selector, hypothesis, tau_direct, tau_spill, M, b_draws,
                       policy):
    s_net, s_w, s_y, s_focal, s_test = replication_seeds(seed, rep).spawn(5)
    net = factory(seed if fixed else _int_seed(s_net))
    n = net.n
    design = CompleteRandomization(n, M)
    w = sample(design, _int_seed(s_w))
    y0 = np.random.default_rng(s_y).standard_normal(n)
    y = setup_one_outcomes(net, w.astype(np.float64), tau_direct, tau_spill, y0)
    try:
        focal = select_focal(selector, net, seed=_int_seed(s_focal))
        res = run_test(net, y, w, design, hypothesis, focal, f"{stat}:degenerate={policy}", b_draws,
                       seed=_int_seed(s_test))
    except DegenerateSamplerError:
        # a single-assignment restricted set: the exact p-value is 1
        return 1.0, focal.size, True
    return res.p_abs, focal.size, False


def _run_reps(fn, reps, n_jobs, args):
    if n_jobs == 1 or reps < 2:
        out = [fn(r, *args) for r in range(reps)]
    else:
        out = Parallel(n_jobs=n_jobs)(delayed(fn)(r, *args) for r in range(reps))
    if not out:
        return np.empty(0), np.empty(0), np.empty(0, dtype=bool)
    p, k, bad = zip(*out)
    return np.asarray(p, dtype=np.float64), np.asarray(k, dtype=np.float64), np.asarray(bad, dtype=bool)


def run_setup_one(network="ws:n=599,k=10,p=0.1", stat="score", selector="greedy", tau_direct=4.0, tau_spill=0.4,
                  reps=100, b_draws=1000, alpha=0.05, seed=0, *, M=None, hypothesis="no-spillovers",
                  policy="zero", n_jobs=1) -> SimResult:
    """Rejection rate of the test of ``hypothesis`` under additive spillovers.

    With ``tau_spill=0`` every hypothesis holds; with ``tau_spill != 0`` the
    no-spillovers null fails while no-korder:k>=2 and no-heterogeneity hold.
    """
    h = parse_hypothesis(hypothesis)
    factory, fixed = network_source(network)
    n = factory(seed).n
    M = n // 2 + n % 2 if M is None else M
    selector = resolve_selector(selector, h)
    design = dict(setup="one", network=str(network), hypothesis=str(h), statistic=stat, selector=selector,
                  tau_direct=tau_direct, tau_spill=tau_spill, M=M, b_draws=b_draws, alpha=alpha, seed=seed)
    p, k, bad = _run_reps(_one_rep_setup_one, reps, n_jobs,
                     (seed, factory, fixed, stat, selector, h, tau_direct, tau_spill, M, b_draws, policy))
    return _summarize(design, p, k, alpha, bad)


def _one_rep_setup_two(rep, seed, factory, fixed, q, lam, stat, selector, tau_direct, tau_spill, M, b_draws, policy):
    s_net, s_cut, s_w, s_y, s_focal, s_test = replication_seeds(seed, rep).spawn(6)
    g2 = factory(seed if fixed else _int_seed(s_net))
    g1 = sparsify(g2, q, seed=_int_seed(s_cut))
    pair = NetworkPair(g1, g2)
    n = g2.n
    design = CompleteRandomization(n, M)
    w = sample(design, _int_seed(s_w))
    eps = np.random.default_rng(s_y).standard_normal(n)
    y = setup_two_outcomes(pair, w.astype(np.float64), tau_direct, tau_spill, lam, eps)
    try:
        focal = select_focal(selector, pair, seed=_int_seed(s_focal))
        res = run_test(pair, y, w, design, "sparsification", focal, f"{stat}:degenerate={policy}", b_draws,
                       seed=_int_seed(s_test))
    except DegenerateSamplerError:
        # a single-assignment restricted set: the exact p-value is 1
        return 1.0, focal.size, True
    return res.p_abs, focal.size, False


def run_setup_two(network="surrogate", q=0.9, lam=0.5, stat="score-cn", tau_direct=0.0, tau_spill=0.4, reps=100,
                  b_draws=1000, alpha=0.05, seed=0, *, M=None, selector="greedy-cn", policy="zero",
                  n_jobs=1) -> SimResult:
    """Rejection rate of the sparsification test; ``lam=0`` makes the null true."""
    if stat not in ("score-cn", "elc-cn"):
        raise ConfigError(f"setup two uses score-cn or elc-cn, got {stat!r}")
    factory, fixed = network_source(network)
    n = factory(seed).n
    M = n // 2 + n % 2 if M is None else M
    selector = resolve_selector(selector, parse_hypothesis("sparsification"))
    design = dict(setup="two", network=str(network), hypothesis="sparsification", statistic=stat, selector=selector,
                  tau_direct=tau_direct, tau_spill=tau_spill, q=q, lam=lam, M=M, b_draws=b_draws, alpha=alpha,
                  seed=seed)
    p, k, bad = _run_reps(_one_rep_setup_two, reps, n_jobs,
                     (seed, factory, fixed, q, lam, stat, selector, tau_direct, tau_spill, M, b_draws, policy))
    return _summarize(design, p, k, alpha, bad)


def _one_rep_appendix_a(rep, seed, n_pairs, b_draws):
    s_w, s_focal, s_naive, s_valid = replication_seeds(seed, rep).spawn(4)
    net = dyad_network(n_pairs)
    n = net.n
    design = CompleteRandomization(n, n_pairs)
    w = sample(design, _int_seed(s_w))
    y = w.astype(np.float64)  # Y_i(0) = 0, Y_i(1) = 1
    naive = run_test(net, y, w, design, "no-effects", np.arange(n), "bond", b_draws, seed=_int_seed(s_naive),
                     keep_draws=True)
    focal = select_eps_net(net, 2, seed=_int_seed(s_focal))
    valid = run_test(net, y, w, design, "no-spillovers", focal, "elc", b_draws, seed=_int_seed(s_valid))
    return naive.p_abs, valid.p_abs, naive.t_obs, float(np.var(naive.draws)), focal.size


def run_appendix_a(n_pairs=1000, reps=1000, b_draws=1000, alpha=0.05, seed=0, *, n_jobs=1):
    """The naive all-edges contrast test against the conditional edge contrast on dyads.

    Returns ``(naive, valid, variance_ratio)``. The ratio compares the
    sampling variance of the observed statistic with the mean variance of its
    naive randomization distribution.
    """
    if n_pairs < 2:
        raise ConfigError("n_pairs must be >= 2")
    args = (seed, n_pairs, b_draws)
    if n_jobs == 1 or reps < 2:
        out = [_one_rep_appendix_a(r, *args) for r in range(reps)]
    else:
        out = Parallel(n_jobs=n_jobs)(delayed(_one_rep_appendix_a)(r, *args) for r in range(reps))
    base = dict(setup="appendix-a", n_pairs=n_pairs, b_draws=b_draws, alpha=alpha, seed=seed)
    if not out:
        empty = np.empty(0)
        return (_summarize(dict(base, arm="naive", statistic="bond"), empty, empty, alpha),
                _summarize(dict(base, arm="valid", statistic="elc"), empty, empty, alpha), float("nan"))
    p_naive, p_valid, t_obs, var_null, n_focal = (np.asarray(c, dtype=np.float64) for c in zip(*out))
    ratio = float(np.var(t_obs) / np.mean(var_null)) if reps > 1 else float("nan")
    naive = _summarize(dict(base, arm="naive", statistic="bond"), p_naive, np.full(reps, 2.0 * n_pairs), alpha)
    valid = _summarize(dict(base, arm="valid", statistic="elc"), p_valid, n_focal, alpha)
    return naive, valid, ratio


# ---------------------------------------------------------------------------
# grids and output

CSV_FIELDS = (
    "setup", "network", "hypothesis", "statistic", "selector", "arm", "tau_direct", "tau_spill", "q", "lam",
    "n_pairs", "M", "b_draws", "alpha", "seed", "replications", "rejection_rate", "mc_se", "degenerate",
    "mean_focal", "variance_ratio",
)

PRESETS = {
    "setup-one": dict(setup="one", network=["ws:n=599,k=10,p=0.1"], stat=["elc", "score", "htn"],
                      selector=["random", "eps-net", "greedy"], tau_direct=[0.0, 4.0], tau_spill=[0.0, 0.4],
                      reps=100, b_draws=1000),
    "setup-two": dict(setup="two", network=["surrogate"], stat=["score-cn", "elc-cn"], q=[0.9, 0.5],
                      lam=[0.0, 0.5], tau_direct=[0.0], tau_spill=[0.4], reps=100, b_draws=1000),
    "appendix-a": dict(setup="appendix-a", n_pairs=[1000], reps=1000, b_draws=1000),
}

_GRID_KEYS = {
    "one": ("network", "stat", "selector", "hypothesis", "tau_direct", "tau_spill"),
    "two": ("network", "stat", "q", "lam", "tau_direct", "tau_spill"),
    "appendix-a": ("n_pairs",),
}


def _listify(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


def run_grid(config: dict, n_jobs: int = 1) -> list[dict]:
    """Run every cell of a grid description and return CSV-ready rows.

    ``config`` holds ``setup`` (``"one"``, ``"two"`` or ``"appendix-a"``),
    list-valued grid axes, and scalars ``reps``, ``b_draws``, ``alpha``,
    ``seed``. A ``preset`` key pulls defaults from :data:`PRESETS`.
    """
    cfg = dict(PRESETS.get(config.get("preset"), {})) if config.get("preset") else {}
    if config.get("preset") and config["preset"] not in PRESETS:
        raise ConfigError(f"unknown preset {config['preset']!r}; expected one of {sorted(PRESETS)}")
    cfg.update({k: v for k, v in config.items() if k != "preset"})
    setup = cfg.get("setup")
    if setup not in _GRID_KEYS:
        raise ConfigError(f"setup must be one of {sorted(_GRID_KEYS)}, got {setup!r}")
    unknown = set(cfg) - set(_GRID_KEYS[setup]) - {"setup", "reps", "b_draws", "alpha", "seed", "M", "policy"}
    if unknown:
        raise ConfigError(f"unknown simulation keys {sorted(unknown)}")
    reps = int(cfg.get("reps", 100))
    b_draws = int(cfg.get("b_draws", 1000))
    alpha = float(cfg.get("alpha", 0.05))
    seed = int(cfg.get("seed", 0))
    if reps < 0:
        raise ConfigError("reps must be >= 0")
    rows = []
    if setup == "appendix-a":
        for n_pairs in _listify(cfg.get("n_pairs", [1000])):
            naive, valid, ratio = run_appendix_a(int(n_pairs), reps, b_draws, alpha, seed, n_jobs=n_jobs)
            for r in (naive, valid):
                rows.append(dict(r.row(), variance_ratio=ratio))
        return rows
    defaults = {"one": dict(network="ws:n=599,k=10,p=0.1", stat="score", selector="greedy",
                            hypothesis="no-spillovers", tau_direct=4.0, tau_spill=0.4),
                "two": dict(network="surrogate", stat="score-cn", q=0.9, lam=0.5, tau_direct=0.0, tau_spill=0.4)}
    keys = _GRID_KEYS[setup]
    axes = [_listify(cfg.get(k, defaults[setup][k])) for k in keys]
    extra = {k: cfg[k] for k in ("M", "policy") if k in cfg}
    for combo in itertools.product(*axes):
        kw = dict(zip(keys, combo))
        if setup == "one":
            res = run_setup_one(kw["network"], kw["stat"], kw["selector"], float(kw["tau_direct"]),
                                float(kw["tau_spill"]), reps, b_draws, alpha, seed,
                                hypothesis=kw["hypothesis"], n_jobs=n_jobs, **extra)
        else:
            res = run_setup_two(kw["network"], float(kw["q"]), float(kw["lam"]), kw["stat"],
                                float(kw["tau_direct"]), float(kw["tau_spill"]), reps, b_draws, alpha, seed,
                                n_jobs=n_jobs, **extra)
        rows.append(res.row())
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: r.get(k, "") for k in CSV_FIELDS})
    return buf.getvalue()


def provenance(config: dict) -> dict:
    return {
        "config": config,
        "versions": {
            "netexact": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "scikit-learn": sklearn.__version__,
        },
    }


def provenance_json(config: dict) -> str:
    return json.dumps(provenance(config), sort_keys=True, indent=2, default=str)


__all__ = [
    "SimResult",
    "run_setup_one",
    "run_setup_two",
    "run_appendix_a",
    "run_grid",
    "rows_to_csv",
    "provenance",
    "setup_one_outcomes",
    "setup_two_outcomes",
    "network_source",
    "PRESETS",
]
