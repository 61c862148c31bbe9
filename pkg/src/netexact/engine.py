"""Randomization-test orchestration.

Draws are generated in fixed-size blocks, each with its own generator derived
from ``(seed, block index)``. Blocks may be evaluated on any number of threads
and the result does not depend on how they were scheduled.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .design import DEFAULT_SUPPORT_CAP, ConditionalSampler
from .exceptions import ConfigError, DegenerateStatisticError
from .focal import partition
from .hypotheses import parse_hypothesis
from .stats import OutcomeData, check_compatible, parse_statistic, prepare, statistic_order

BLOCK_SIZE = 256
MAX_DEGENERATE_FRACTION = 0.01
# relative slack when comparing |T_b| with |T_obs|: the same assignment can be
# evaluated with different summation orders in different batch shapes
TIE_RTOL = 1e-9


@dataclass
class TestResult:
    t_obs: float
    b_draws: int
    p_abs: float
    p_two: float
    degenerate_draws: int
    seed: int | None
    draws: np.ndarray | None = field(default=None, repr=False, compare=False)

    __test__ = False  # not a pytest class

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("draws")
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)

    def summary(self) -> str:
        return (
            f"T_obs={self.t_obs:.6g}  p_abs={self.p_abs:.4f}  p_two={self.p_two:.4f}  "
            f"B={self.b_draws}  degenerate={self.degenerate_draws}  seed={self.seed}"
        )


def resolve_seed(seed) -> int:
    """Turn ``None`` into fresh OS entropy so the run can be reproduced."""
    if seed is None:
        return int(np.random.SeedSequence().entropy)
    seed = int(seed)
    if seed < 0:
        raise ConfigError(f"seed must be nonnegative, got {seed}")
    return seed


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(block,)))


def _tail_counts(t: np.ndarray, t_obs: float) -> tuple[int, int, int]:
    tol = TIE_RTOL * abs(t_obs)
    n_abs = int(np.count_nonzero(np.abs(t) >= abs(t_obs) - tol))
    n_hi = int(np.count_nonzero(t >= t_obs - tol))
    n_lo = int(np.count_nonzero(t <= t_obs + tol))
    return n_abs, n_hi, n_lo


def _apply_policy(t: np.ndarray, policy: str, weights: np.ndarray | None = None):
    bad = np.isnan(t)
    n_bad = int(bad.sum())
    if not n_bad:
        return t, weights, 0
    if policy == "error":
        raise DegenerateStatisticError(f"statistic undefined for {n_bad} draw(s)")
    if policy == "zero":
        return np.where(bad, 0.0, t), weights, n_bad
    share = bad.mean() if weights is None else weights[bad].sum()
    if share > MAX_DEGENERATE_FRACTION:
        raise DegenerateStatisticError(
            f"statistic undefined for {n_bad} of {t.size} draws ({share:.1%}), above the "
            f"{MAX_DEGENERATE_FRACTION:.0%} limit"
        )
    keep = ~bad
    return t[keep], None if weights is None else weights[keep], n_bad


@dataclass
class PreparedTest:
    """Everything fixed by the data: sampler, statistic evaluator, observed value."""

    sampler: ConditionalSampler
    evaluator: object
    t_obs: float
    policy: str
    partition: object


def prepare_test(nets, y, w_obs, design, h, focal, stat) -> PreparedTest:
    h = parse_hypothesis(h)
    stat = parse_statistic(stat)
    check_compatible(stat, h, nets)
    y = y if isinstance(y, OutcomeData) else OutcomeData(y)
    part = partition(h, nets, focal)
    evaluator = prepare(stat, part, y, nets, statistic_order(h))
    sampler = ConditionalSampler(design, h, nets, part.focal, w_obs)
    t_obs = float(evaluator(sampler.w_obs.astype(np.float64)))
    if math.isnan(t_obs):
        if stat.degenerate != "zero":
            raise DegenerateStatisticError(f"statistic {stat.kind!r} is undefined at the observed assignment")
        # "zero" defines the statistic as 0 wherever it is undefined, draws and data alike
        t_obs = 0.0
    return PreparedTest(sampler, evaluator, t_obs, stat.degenerate, part)


def draw_statistics(prep: PreparedTest, b_draws: int, seed: int, threads: int = 1,
                    block_size: int = BLOCK_SIZE) -> np.ndarray:
    """Statistic values for ``b_draws`` conditional draws, in draw order."""
    n_blocks = -(-b_draws // block_size)

    def run(b):
        size = min(block_size, b_draws - b * block_size)
        w = prep.sampler.draw(block_rng(seed, b), size)
        return prep.evaluator.evaluate(w.astype(np.float64))

    if threads > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(n_blocks)))
    else:
        parts = [run(b) for b in range(n_blocks)]
    return np.concatenate(parts) if parts else np.empty(0)


def pvalues_from_draws(t_obs: float, t: np.ndarray, add_one: bool = False) -> tuple[float, float]:
    n_abs, n_hi, n_lo = _tail_counts(t, t_obs)
    b = t.size
    if add_one:
        p_abs, hi, lo = (1 + n_abs) / (1 + b), (1 + n_hi) / (1 + b), (1 + n_lo) / (1 + b)
    else:
        p_abs, hi, lo = n_abs / b, n_hi / b, n_lo / b
    return p_abs, min(1.0, 2 * min(hi, lo))


def run_test(nets, y, w_obs, design, h, focal, stat, b_draws: int = 1000, seed=None, *,
             add_one: bool = False, threads: int = 1, keep_draws: bool = False) -> TestResult:
    """Monte Carlo p-values from ``b_draws`` i.i.d. draws of the conditional law.

    Parameters
    ----------
    nets : Network or NetworkPair
    y : OutcomeData or array-like
        Outcomes; NaN allowed for non-focal units.
    w_obs : array-like of {0, 1}
    design : CompleteRandomization or ClusterRandomization
    h : NullHypothesis or str
    focal : array-like of int
    stat : StatisticSpec or str
    b_draws : int
    seed : int or None
        ``None`` draws fresh entropy, reported in the result.
    add_one : bool
        Report ``(1 + count) / (1 + B)`` instead of ``count / B``.
    threads : int
        Worker threads; the result is identical for any value.
    """
    if b_draws < 1:
        raise ConfigError(f"b_draws must be >= 1, got {b_draws}")
    seed = resolve_seed(seed)
    prep = prepare_test(nets, y, w_obs, design, h, focal, stat)
    prep.sampler.check_nondegenerate()
    t = draw_statistics(prep, b_draws, seed, threads)
    t_used, _, n_bad = _apply_policy(t, prep.policy)
    if t_used.size == 0:
        raise DegenerateStatisticError("no draw produced a defined statistic")
    p_abs, p_two = pvalues_from_draws(prep.t_obs, t_used, add_one)
    return TestResult(prep.t_obs, b_draws, p_abs, p_two, n_bad, seed, t if keep_draws else None)


def exact_test(nets, y, w_obs, design, h, focal, stat, *, cap: int = DEFAULT_SUPPORT_CAP) -> TestResult:
    """Exact p-values by enumerating the conditional support."""
    prep = prepare_test(nets, y, w_obs, design, h, focal, stat)
    ws, probs = prep.sampler.enumerate(cap)
    t = prep.evaluator.evaluate(ws.astype(np.float64))
    t_used, p_used, n_bad = _apply_policy(t, prep.policy, probs)
    if p_used.sum() <= 0:
        raise DegenerateStatisticError("statistic undefined on the whole support")
    p_used = p_used / p_used.sum()
    tol = TIE_RTOL * abs(prep.t_obs)
    p_abs = float(p_used[np.abs(t_used) >= abs(prep.t_obs) - tol].sum())
    hi = float(p_used[t_used >= prep.t_obs - tol].sum())
    lo = float(p_used[t_used <= prep.t_obs + tol].sum())
    return TestResult(prep.t_obs, int(ws.shape[0]), min(p_abs, 1.0), min(1.0, 2 * min(hi, lo)), n_bad, None, t)
