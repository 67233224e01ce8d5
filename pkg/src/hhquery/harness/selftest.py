"""Quick in-package invariant checks, runnable without the test suite."""

from __future__ import annotations

import itertools

import numpy as np

from .. import bounds, stats
from ..dist import Problem, make_explicit
from ..estimators import run_qm1, run_qm2, run_qm2n
from ..mws import SignedGraph, extract_mws
from ..oracle import OracleSession


def _kl_roundtrip():
    # draw the root q* and derive beta, so the root is well inside (0, 1)
    rng = np.random.default_rng(1)
    for _ in range(200):
        p, q_star = rng.uniform(0.001, 0.999, size=2)
        n = int(rng.integers(1, 10_001))
        beta = n * stats.kl_bern(p, q_star)
        q = stats.kl_lcb(p, n, beta) if q_star < p else stats.kl_ucb(p, n, beta)
        if abs(n * stats.kl_bern(p, q) - beta) > 1e-9:
            return False
    return True


def _chernoff_symmetry():
    grid = np.linspace(0.05, 0.95, 19)
    return all(abs(stats.chernoff_info(x, y) - stats.chernoff_info(y, x)) < 1e-12 for x in grid for y in grid)


def _bound_identities():
    P, g, d = [0.3, 0.25, 0.2, 0.15, 0.1], 0.12, 0.1
    return bounds.thm4_lower(P, g, d).value == bounds.thm2_lower(P, g, d).value / 2


def _qm1_invariants():
    dist = make_explicit([0.5, 0.3, 0.2])
    prob = Problem(dist, 0.25, 0.1)
    a = run_qm1(prob, OracleSession("qm1", dist, 3))
    b = run_qm1(prob, OracleSession("qm1", dist, 3), fast=False)
    return a.queries == a.rounds and sum(x.success_count for x in a.bins) == a.rounds and a == b


def _qm2_bins_pure():
    dist = make_explicit([0.5, 0.3, 0.2])
    prob = Problem(dist, 0.25, 0.1)
    s = OracleSession("qm2", dist, 5)
    res = run_qm2(prob, s, trace=True)
    bins_ok = all(len({s.debug_truth(b.representative)}) == 1 for b in res.bins)
    labels = res.labels(s)
    per_round = all(q <= a for q, a in zip(res.per_round_queries, res.per_round_active))
    return bins_ok and len(labels) == len(set(labels)) and per_round


def _qm2n_phase1_count():
    dist = make_explicit([0.7, 0.3])
    prob = Problem(dist, 0.4, 0.25)
    res = run_qm2n(prob, OracleSession("qm2n", dist, 2, pe=0.1), t0=12)
    return res.metadata["phase1_queries"] == 12 * 11 // 2


def _mws_exact():
    rng = np.random.default_rng(4)
    n = 8
    w = np.triu(rng.choice([-1, 1], size=(n, n)), 1)
    g = SignedGraph(w + w.T)
    best = max(g.wt(s) for r in range(n + 1) for s in itertools.combinations(range(n), r))
    return extract_mws(g).weight == best


CHECKS = [
    ("kl interval round trip", _kl_roundtrip),
    ("chernoff information symmetry", _chernoff_symmetry),
    ("thm4 = thm2 / 2", _bound_identities),
    ("qm1 counts and batching", _qm1_invariants),
    ("qm2 bins pure, per-round queries", _qm2_bins_pure),
    ("qm2n phase-1 query count", _qm2n_phase1_count),
    ("mws exhaustive optimum", _mws_exact),
]


def run() -> list[tuple[str, bool]]:
    return [(name, bool(fn())) for name, fn in CHECKS]
