"""Threshold-based heavy-hitter identification under direct and pairwise query oracles."""

from .dist import Distribution, DistributionError, Problem, ground_truth, make_explicit, make_setting_a, make_zipf
from .estimators import (
    BoundKind,
    RunResult,
    is_success,
    run_qm1,
    run_qm1n,
    run_qm2,
    run_qm2_naive,
    run_qm2n,
)
from .oracle import OracleSession, QueryModel

__version__ = "0.1.0"

__all__ = [
    "BoundKind",
    "Distribution",
    "DistributionError",
    "OracleSession",
    "Problem",
    "QueryModel",
    "RunResult",
    "ground_truth",
    "is_success",
    "make_explicit",
    "make_setting_a",
    "make_zipf",
    "run_qm1",
    "run_qm1n",
    "run_qm2",
    "run_qm2_naive",
    "run_qm2n",
]
