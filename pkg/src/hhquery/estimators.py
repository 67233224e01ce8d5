"""Sequential threshold estimators for the four oracle models.

All estimators share one trick for speed. Between status changes nothing
observable happens, so when a bin provably cannot be classified in the next
S rounds (its reachable empirical means all stay inside the current
confidence region) those S rounds are queried as one vectorized batch.
``fast=False`` disables this and steps one round at a time; both paths
produce identical results.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import stats
from .dist import Problem, check_separated, ground_truth
from .mws import SignedGraph, extract_all_bins
from .oracle import OracleSession, QueryModel

MAX_QUERIES = 10**8
T0_CAP = 5000
# upper limit on samples x representatives handled in one vectorized batch
BATCH_CELLS = 1 << 20
# relative and absolute slack keeping the skip-ahead test safely conservative
_REL_SLACK = 1e-9
_ABS_SLACK = 1e-12


class QueryBudgetExceeded(RuntimeError):
    pass


class InfeasibleT0Error(ValueError):
    """The phase-1 graph for the noisy pairwise model is too large to build."""


class BoundKind(str, enum.Enum):
    KL = "kl"
    HOEFFDING = "hoeffding"
    BERNSTEIN = "bernstein"


class BinStatus(str, enum.Enum):
    ACTIVE = "active"
    ABOVE = "above"
    BELOW = "below"


@dataclass
class BinState:
    id: int
    success_count: int
    created_at: int
    representative: int
    ci: stats.ConfidenceInterval
    status: BinStatus = BinStatus.ACTIVE
    # denominator of the empirical rate at the last update
    effective_n: int = 0


@dataclass
class RunResult:
    # support labels for direct models, bin ids for pairwise ones
    estimate: frozenset
    queries: int
    rounds: int
    per_round_active: tuple[int, ...] | None = None
    bins: tuple[BinState, ...] = ()
    metadata: dict = field(default_factory=dict)
    per_round_queries: tuple[int, ...] | None = None

    def labels(self, session: OracleSession | None = None) -> list[int]:
        """Support labels of the returned bins, in bin order."""
        if self.metadata.get("label_space") == "support":
            return sorted(self.estimate)
        if session is None:
            raise ValueError("pairwise estimates need the session to recover labels")
        return [session.debug_truth(self.bins[b].representative) for b in sorted(self.estimate)]


def is_success(result: RunResult, problem: Problem, session: OracleSession | None = None) -> bool:
    """True when the estimate maps one-to-one onto the true heavy-hitter set."""
    labels = result.labels(session)
    return len(set(labels)) == len(labels) and set(labels) == ground_truth(problem)


# -- vectorized classification ---------------------------------------------


def classify(counts, n, beta, thr: float, kind: BoundKind = BoundKind.KL):
    """Return (above, below) masks: lcb > thr and ucb < thr respectively."""
    counts = np.asarray(counts, dtype=float)
    n = np.broadcast_to(np.asarray(n, dtype=float), counts.shape)
    p = counts / n
    if kind is BoundKind.KL:
        # n d(p||thr) > beta is exactly "thr outside [lcb, ucb]"
        res = n * np.asarray(stats.kl_bern(p, thr)) > beta
        return res & (p > thr), res & (p < thr)
    if kind is BoundKind.HOEFFDING:
        w = np.sqrt(beta / (2.0 * n))
        return p - w > thr, p + w < thr
    ok = n >= 2
    safe = np.where(ok, n, 2.0)
    var = safe / (safe - 1.0) * p * (1.0 - p)
    w = np.sqrt(2.0 * var * beta / safe) + 7.0 * beta / (3.0 * (safe - 1.0))
    return ok & (p - w > thr), ok & (p + w < thr)


def _quiet(counts, n, beta_n, thr, kind, s):
    """Can no bin resolve during the next s rounds? Elementwise over bins."""
    m = n + s
    lo = counts / m
    hi = (counts + s) / m
    if kind is BoundKind.KL:
        d = np.maximum(np.asarray(stats.kl_bern(lo, thr)), np.asarray(stats.kl_bern(hi, thr)))
        return m * d <= beta_n * (1 - _REL_SLACK) - _ABS_SLACK
    dist = np.maximum(np.abs(lo - thr), np.abs(hi - thr))
    if kind is BoundKind.HOEFFDING:
        rhs = np.sqrt(beta_n / (2.0 * m))
    else:
        vmin = np.minimum(lo * (1 - lo), hi * (1 - hi))
        rhs = np.sqrt(2.0 * vmin * beta_n / m) + 7.0 * beta_n / (3.0 * (m - 1))
    return dist <= rhs * (1 - _REL_SLACK) - _ABS_SLACK


def quiet_horizon(counts, n: int, beta_n: float, thr: float, kind: BoundKind, cap: int) -> np.ndarray:
    """Largest S <= cap per bin such that the bin stays unresolved in rounds n+1..n+S.

    Relies on beta being nondecreasing and the reachable means after s more
    rounds lying in [c/(n+S), (c+S)/(n+S)]; the test is monotone in S.
    """
    counts = np.asarray(counts, dtype=float)
    lo = np.zeros(counts.shape, dtype=np.int64)
    hi = np.full(counts.shape, cap + 1, dtype=np.int64)
    while True:
        gap = hi - lo > 1
        if not gap.any():
            return lo
        mid = (lo + hi) // 2
        good = _quiet(counts, n, beta_n, thr, kind, mid.astype(float))
        lo = np.where(gap & good, mid, lo)
        hi = np.where(gap & ~good, mid, hi)


def _interval(count: int, n: int, beta: float, kind: BoundKind) -> stats.ConfidenceInterval:
    if n <= 0:
        return stats.ConfidenceInterval(0.0, 1.0)
    p = count / n
    if kind is BoundKind.KL:
        return stats.kl_interval(p, n, beta)
    if kind is BoundKind.HOEFFDING:
        return stats.hoeffding_interval(p, n, beta)
    if n < 2:
        return stats.ConfidenceInterval(0.0, 1.0)
    return stats.bernstein_interval(p, stats.bernoulli_sample_variance(p, n), n, beta)


def _check_budget(session: OracleSession, max_queries: int) -> None:
    if session.query_count > max_queries:
        raise QueryBudgetExceeded(
            f"query count {session.query_count} exceeded the cap of {max_queries}"
        )


def _status(above: bool, below: bool) -> BinStatus:
    if above:
        return BinStatus.ABOVE
    if below:
        return BinStatus.BELOW
    return BinStatus.ACTIVE


# -- direct-query models -----------------------------------------------------


def _run_direct(problem, session, thr, bound, fast, max_queries, trace) -> RunResult:
    bound = BoundKind(bound)
    k = problem.k
    sched = stats.BetaSchedule(stats.ScheduleKind.QM1, k, problem.delta)
    counts = np.zeros(k, dtype=np.int64)
    t = 0
    active_trace = [] if trace else None
    # trace needs every round evaluated
    fast = fast and not trace
    while True:
        if t == 0:
            above = below = np.zeros(k, dtype=bool)
        else:
            above, below = classify(counts, t, sched.beta(t), thr, bound)
        active = ~(above | below)
        if active_trace is not None and t > 0:
            active_trace.append(int(active.sum()))
        if not active.any():
            break
        step = 1
        if fast and t > 0:
            cap = max(1, min(BATCH_CELLS, max_queries - session.query_count))
            h = quiet_horizon(counts[active], t, sched.beta(t), thr, bound, cap)
            step = int(h.max()) + 1
        vals = session.query_values(np.arange(t + 1, t + step + 1))
        counts += np.bincount(vals - 1, minlength=k)
        t += step
        _check_budget(session, max_queries)

    beta = sched.beta(t)
    bins = tuple(
        BinState(i, int(counts[i]), 0, 0, _interval(int(counts[i]), t, beta, bound), _status(above[i], below[i]), t)
        for i in range(k)
    )
    estimate = frozenset(int(i) + 1 for i in np.flatnonzero(above))
    meta = {"model": session.model.value, "bound": bound.value, "threshold": thr, "label_space": "support"}
    return RunResult(
        estimate, session.query_count, t, tuple(active_trace) if trace else None, bins, meta,
        tuple([1] * t) if trace else None,
    )


def run_qm1(
    problem: Problem,
    session: OracleSession,
    bound: BoundKind = BoundKind.KL,
    fast: bool = True,
    max_queries: int = MAX_QUERIES,
    trace: bool = False,
) -> RunResult:
    if session.model is not QueryModel.QM1:
        raise ValueError(f"run_qm1 needs a qm1 session, got {session.model.value}")
    return _run_direct(problem, session, problem.gamma, bound, fast, max_queries, trace)


def qm1n_threshold(gamma: float, pe: float, k: int) -> float:
    return (1.0 - pe) * gamma + pe / k


def run_qm1n(
    problem: Problem,
    session: OracleSession,
    bound: BoundKind = BoundKind.KL,
    fast: bool = True,
    max_queries: int = MAX_QUERIES,
    trace: bool = False,
) -> RunResult:
    """Direct-query estimator on noisy responses with the shifted threshold."""
    if session.model is not QueryModel.QM1N:
        raise ValueError(f"run_qm1n needs a qm1n session, got {session.model.value}")
    pe, k = session.pe, problem.k
    thr = qm1n_threshold(problem.gamma, pe, k)
    check_separated([(1.0 - pe) * p + pe / k for p in problem.dist.probs], thr, "gamma'")
    res = _run_direct(problem, session, thr, bound, fast, max_queries, trace)
    res.metadata["pe"] = pe
    return res


# -- pairwise models -----------------------------------------------------------


class _Bins:
    """Growable per-bin arrays for the pairwise estimators."""

    def __init__(self):
        self.counts: list[int] = []
        self.reps: list[int] = []
        self.created: list[int] = []
        self.status: list[BinStatus] = []
        self.last_n: list[int] = []
        self.last_beta: list[float] = []

    def add(self, rep: int, t: int, count: int = 1) -> int:
        self.counts.append(count)
        self.reps.append(rep)
        self.created.append(t)
        self.status.append(BinStatus.ACTIVE)
        self.last_n.append(0)
        self.last_beta.append(0.0)
        return len(self.counts) - 1

    def __len__(self):
        return len(self.counts)

    def freeze(self, kind: BoundKind) -> tuple[BinState, ...]:
        return tuple(
            BinState(
                b, self.counts[b], self.created[b], self.reps[b],
                _interval(self.counts[b], self.last_n[b], self.last_beta[b], kind),
                self.status[b], self.last_n[b],
            )
            for b in range(len(self))
        )


def _scan_batch(session, samples: np.ndarray, reps: np.ndarray, sequential: bool):
    """Compare samples against reps; returns (hits per rep, queries per sample)."""
    if sequential:
        pos = session.first_match(samples, reps)
        hits = np.bincount(pos[pos >= 0], minlength=reps.size)
        per = np.where(pos >= 0, pos + 1, reps.size)
        return hits, per, pos
    resp = session.query_pairs(reps[None, :], samples[:, None]) > 0
    return resp.sum(axis=0), np.full(samples.size, reps.size), resp


def _run_pairwise_qm2(problem, session, bound, fast, max_queries, trace, naive) -> RunResult:
    bound = BoundKind(bound)
    gamma, k = problem.gamma, problem.k
    sched = stats.BetaSchedule(stats.ScheduleKind.QM2, k, problem.delta)
    t_prime = stats.phase1_length_qm2(k, problem.delta, gamma)
    bins = _Bins()
    in_s: set[int] = set()
    active_trace, query_trace = ([], []) if trace else (None, None)

    def update(ids, t):
        """Recompute statuses of ``ids`` at round t; returns (above, below) masks."""
        if not ids:
            return np.zeros(0, bool), np.zeros(0, bool)
        c = np.array([bins.counts[b] for b in ids])
        beta = sched.beta(t)
        above, below = classify(c, t, beta, gamma, bound)
        for b, a, bl in zip(ids, above, below):
            bins.last_n[b] = t
            bins.last_beta[b] = beta
            if not naive:
                if a:
                    in_s.add(b)
                if bins.status[b] is BinStatus.ACTIVE:
                    bins.status[b] = _status(a, bl)
            else:
                bins.status[b] = _status(a, bl)
        return above, below

    # phase 1: rounds 1..T', new bins allowed
    cand: list[int] = []
    for t in range(1, t_prime + 1):
        reps = np.array([bins.reps[b] for b in cand], dtype=np.int64)
        before = session.query_count
        pos = int(session.first_match(np.array([t]), reps)[0])
        if trace:
            active_trace.append(len(cand))
            query_trace.append(session.query_count - before)
        touched = list(cand)
        if pos >= 0:
            bins.counts[cand[pos]] += 1
        else:
            touched.append(bins.add(t, t))
        above, below = update(touched, t)
        if naive:
            cand = list(range(len(bins)))
        else:
            # bins that drop out keep frozen bounds, so they never return
            cand = [b for b, bl in zip(touched, below) if not bl]
            cand.sort()
        _check_budget(session, max_queries)

    t = t_prime
    if naive:
        # every bin stays in play; stop once all are classified together
        above, below = update(cand, t)
        while (~(above | below)).any():
            open_ids = [b for b, a, bl in zip(cand, above, below) if not (a or bl)]
            step = 1
            if fast:
                cap = max(1, min(BATCH_CELLS // max(len(cand), 1), max_queries - session.query_count))
                c = np.array([bins.counts[b] for b in open_ids])
                step = int(quiet_horizon(c, t, sched.beta(t), gamma, bound, cap).max()) + 1
            reps = np.array([bins.reps[b] for b in cand], dtype=np.int64)
            hits, per, _ = _scan_batch(session, np.arange(t + 1, t + step + 1), reps, True)
            for b, h in zip(cand, hits):
                bins.counts[b] += int(h)
            if trace:
                active_trace.extend([len(cand)] * step)
                query_trace.extend(per.tolist())
            t += step
            above, below = update(cand, t)
            _check_budget(session, max_queries)
        estimate = frozenset(b for b, a in zip(cand, above) if a)
    else:
        # phase 2: only bins still in contention are compared; no new bins
        while cand:
            step = 1
            if fast:
                cap = max(1, min(BATCH_CELLS // len(cand), max_queries - session.query_count))
                c = np.array([bins.counts[b] for b in cand])
                step = int(quiet_horizon(c, t, sched.beta(t), gamma, bound, cap).min()) + 1
            reps = np.array([bins.reps[b] for b in cand], dtype=np.int64)
            hits, per, _ = _scan_batch(session, np.arange(t + 1, t + step + 1), reps, True)
            for b, h in zip(cand, hits):
                bins.counts[b] += int(h)
            if trace:
                active_trace.extend([len(cand)] * step)
                query_trace.extend(per.tolist())
            t += step
            above, below = update(cand, t)
            cand = [b for b, a, bl in zip(cand, above, below) if not (a or bl)]
            _check_budget(session, max_queries)
        estimate = frozenset(in_s)

    meta = {
        "model": session.model.value,
        "bound": bound.value,
        "threshold": gamma,
        "label_space": "bin",
        "t_prime": t_prime,
        "naive": naive,
        "n_bins": len(bins),
    }
    return RunResult(
        estimate, session.query_count, t,
        tuple(active_trace) if trace else None, bins.freeze(bound), meta,
        tuple(query_trace) if trace else None,
    )


def run_qm2(
    problem: Problem,
    session: OracleSession,
    bound: BoundKind = BoundKind.KL,
    fast: bool = True,
    max_queries: int = MAX_QUERIES,
    trace: bool = False,
) -> RunResult:
    if session.model is not QueryModel.QM2:
        raise ValueError(f"run_qm2 needs a qm2 session, got {session.model.value}")
    return _run_pairwise_qm2(problem, session, bound, fast, max_queries, trace, naive=False)


def run_qm2_naive(
    problem: Problem,
    session: OracleSession,
    bound: BoundKind = BoundKind.KL,
    fast: bool = True,
    max_queries: int = MAX_QUERIES,
    trace: bool = False,
) -> RunResult:
    """Baseline that compares each sample against every bin, never eliminating."""
    if session.model is not QueryModel.QM2:
        raise ValueError(f"run_qm2_naive needs a qm2 session, got {session.model.value}")
    return _run_pairwise_qm2(problem, session, bound, fast, max_queries, trace, naive=True)


def qm2n_threshold(gamma: float, pe: float) -> float:
    return (1.0 - 2.0 * pe) * gamma + pe


def run_qm2n(
    problem: Problem,
    session: OracleSession,
    pe: float | None = None,
    t0: int | None = None,
    t0_cap: int = T0_CAP,
    mws_seed: int = 0,
    bound: BoundKind = BoundKind.KL,
    fast: bool = True,
    max_queries: int = MAX_QUERIES,
    trace: bool = False,
) -> RunResult:
    """Noisy pairwise estimator: MWS clustering of T0 samples, then KL elimination.

    ``t0`` overrides the phase-1 size from the closed-form constants; this
    is a debug knob and is recorded in the result metadata.
    """
    if session.model is not QueryModel.QM2N:
        raise ValueError(f"run_qm2n needs a qm2n session, got {session.model.value}")
    pe = session.pe if pe is None else float(pe)
    if pe != session.pe:
        raise ValueError(f"pe={pe} does not match the session noise rate {session.pe}")
    bound = BoundKind(bound)
    gamma, k, delta = problem.gamma, problem.k, problem.delta
    g_prime = qm2n_threshold(gamma, pe)
    check_separated([(1.0 - 2.0 * pe) * p + pe for p in problem.dist.probs], g_prime, "gamma'")

    meta = {"model": session.model.value, "bound": bound.value, "threshold": g_prime, "label_space": "bin"}
    if t0 is None:
        consts = stats.t0_qm2n(k, delta, gamma, pe)
        t0, s0 = consts.t0, consts.s0
        meta["t0_override"] = False
    else:
        t0 = int(t0)
        if t0 < 2:
            raise ValueError(f"t0 override must be >= 2, got {t0}")
        s0 = gamma * t0 / 4.0
        meta["t0_override"] = True
    if t0 > t0_cap:
        raise InfeasibleT0Error(f"T0={t0} exceeds the cap {t0_cap}; desk-scale infeasible")
    meta.update(t0=t0, s0=s0)

    # phase 1: all pairs among the first T0 samples
    iu, ju = np.triu_indices(t0, 1)
    resp = session.query_pairs(iu + 1, ju + 1)
    graph = SignedGraph.from_pairs(t0, iu, ju, resp.astype(np.int64))
    phase1_queries = session.query_count
    extracted = extract_all_bins(graph, s0, rng=np.random.default_rng(mws_seed))
    meta.update(phase1_queries=phase1_queries, mws_exact=all(r.exact for r in extracted))

    bins = _Bins()
    for r in extracted:
        # representative: the earliest sample in the cluster
        bins.add(min(r.nodes) + 1, t0, count=0)
    sched = stats.BetaSchedule(stats.ScheduleKind.QM2N, k, delta, t0=t0)

    in_s: set[int] = set()
    cand = list(range(len(bins)))
    t = t0
    active_trace, query_trace = ([], []) if trace else (None, None)
    while cand:
        n = t - t0
        step = 1
        if fast and n > 0:
            cap = max(1, min(BATCH_CELLS // len(cand), max_queries - session.query_count))
            c = np.array([bins.counts[b] for b in cand])
            step = int(quiet_horizon(c, n, sched.beta(t), g_prime, bound, cap).min()) + 1
        reps = np.array([bins.reps[b] for b in cand], dtype=np.int64)
        hits, per, _ = _scan_batch(session, np.arange(t + 1, t + step + 1), reps, False)
        for b, h in zip(cand, hits):
            bins.counts[b] += int(h)
        if trace:
            active_trace.extend([len(cand)] * step)
            query_trace.extend(per.tolist())
        t += step
        n = t - t0
        beta = sched.beta(t)
        c = np.array([bins.counts[b] for b in cand])
        above, below = classify(c, n, beta, g_prime, bound)
        for b, a, bl in zip(cand, above, below):
            bins.last_n[b] = n
            bins.last_beta[b] = beta
            if a:
                in_s.add(b)
            bins.status[b] = _status(a, bl)
        cand = [b for b, a, bl in zip(cand, above, below) if not (a or bl)]
        _check_budget(session, max_queries)

    meta.update(pe=pe, n_bins=len(bins), cluster_sizes=[len(r) for r in extracted])
    return RunResult(
        frozenset(in_s), session.query_count, t,
        tuple(active_trace) if trace else None, bins.freeze(bound), meta,
        tuple(query_trace) if trace else None,
    )


ESTIMATORS = {
    "qm1": (QueryModel.QM1, run_qm1),
    "qm1n": (QueryModel.QM1N, run_qm1n),
    "qm2": (QueryModel.QM2, run_qm2),
    "qm2-naive": (QueryModel.QM2, run_qm2_naive),
    "qm2n": (QueryModel.QM2N, run_qm2n),
}
