"""Exact randomization tests for non-sharp interference hypotheses on a network."""

__version__ = "0.1.0"

from .design import ClusterRandomization, CompleteRandomization, ConditionalSampler  # noqa: E402
from .engine import TestResult, exact_test, run_test  # noqa: E402
from .estimator import FocalSelector, NetworkRandomizationTest  # noqa: E402
from .focal import partition, select_focal  # noqa: E402
from .hypotheses import NoKthOrder, NullHypothesis, parse_hypothesis  # noqa: E402
from .netgraph import Network, NetworkPair, read_edge_list, watts_strogatz  # noqa: E402
from .stats import OutcomeData, parse_statistic  # noqa: E402

__all__ = [
    "ClusterRandomization",
    "CompleteRandomization",
    "ConditionalSampler",
    "FocalSelector",
    "Network",
    "NetworkPair",
    "NetworkRandomizationTest",
    "NoKthOrder",
    "NullHypothesis",
    "OutcomeData",
    "TestResult",
    "exact_test",
    "parse_hypothesis",
    "parse_statistic",
    "partition",
    "read_edge_list",
    "run_test",
    "select_focal",
    "watts_strogatz",
]
