"""End-to-end acceptance checks 1-11, each at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v``; a PASS/FAIL line per
criterion is printed in the terminal summary.
"""

import math
import time

import numpy as np
import pytest
from scipy.stats import binomtest, linregress

from conftest import ACCEPTANCE
from hhquery import bounds, stats
from hhquery.dist import Problem, make_explicit
from hhquery.estimators import is_success, run_qm2n
from hhquery.harness.config import ExperimentConfig, Sweep
from hhquery.harness.runner import compare_bounds, run_experiment
from hhquery.mws import SignedGraph, extract_all_bins, extract_mws
from hhquery.oracle import OracleSession

pytestmark = pytest.mark.slow

BASE = ExperimentConfig(
    dist_spec="explicit:0.3,0.25,0.2,0.15,0.1", gamma=0.12, delta=0.1, workers=1, reproducible=True
)
SETTING_A = BASE.with_(gamma=0.1, sweep=Sweep.parse("p3:0.13:0.19:7"), trials=15)
# step 0.02 like linspace(0.02, 0.4, 20) but never landing on a p_i
SETTING_B = BASE.with_(sweep=Sweep.parse("gamma:0.025:0.405:20"), trials=15)
SETTING_C = BASE.with_(dist_spec="zipf:1:30", gamma=0.1, sweep=Sweep.parse("zipf-beta:0.5:4.5:9"), trials=15)


def report(n, ok, detail):
    ACCEPTANCE[n] = (bool(ok), detail)
    assert ok, detail


def binom_ok(successes, n, target):
    return binomtest(successes, n, target, alternative="less").pvalue


@pytest.fixture(scope="module")
def qm1_400():
    start = time.perf_counter()
    recs, summary = run_experiment(BASE.with_(trials=400))
    return recs, summary, time.perf_counter() - start


@pytest.fixture(scope="module")
def gamma_sweep_50():
    _, summary = run_experiment(SETTING_B.with_(trials=50))
    return summary["points"]


@pytest.fixture(scope="module")
def setting_a_bounds():
    return compare_bounds(SETTING_A)


def test_c1_qm1_delta_correct(qm1_400):
    recs, _, wall = qm1_400
    succ = sum(r.success for r in recs)
    pv = binom_ok(succ, len(recs), 0.9)
    report(1, pv >= 0.05 and wall < 60, f"success {succ}/400, one-sided p={pv:.3g}, {wall:.1f}s (< 60s)")


def test_c2_qm2_delta_correct():
    start = time.perf_counter()
    recs, _ = run_experiment(BASE.with_(model="qm2", trials=400))
    wall = time.perf_counter() - start
    succ = sum(r.success for r in recs)
    pv = binom_ok(succ, len(recs), 0.9)
    report(2, pv >= 0.05 and wall < 300, f"success {succ}/400, one-sided p={pv:.3g}, {wall:.1f}s (< 300s)")


def test_c3_thm1_containment(qm1_400):
    recs, _, _ = qm1_400
    within = sum(r.queries <= r.thm_upper for r in recs)
    pv = binom_ok(within, len(recs), 0.9)
    report(3, pv >= 0.05, f"{within}/400 within thm1_upper={recs[0].thm_upper:.6g}, p={pv:.3g}")


def test_c4_lower_bound_direction(gamma_sweep_50):
    gaps = [pt["mean_queries"] - (pt["thm_lower"] - 2 * pt["se_queries"]) for pt in gamma_sweep_50]
    worst = int(np.argmin(gaps))
    pt = gamma_sweep_50[worst]
    report(
        4,
        min(gaps) >= 0 and len(gaps) == 20 and all(p["trials"] >= 50 for p in gamma_sweep_50),
        f"20 points x 50 trials; tightest gamma={pt['gamma']:.3f}: mean {pt['mean_queries']:.1f} "
        f"vs thm2_lower {pt['thm_lower']:.1f} - 2SE",
    )


def test_c5_linear_in_inverse_dstar(setting_a_bounds):
    pts = setting_a_bounds["kl"]
    x = [1.0 / stats.chernoff_info(pt["sweep_value"], 0.1) for pt in pts]
    y = [pt["mean_queries"] for pt in pts]
    fit = linregress(x, y)
    report(5, len(pts) == 7 and fit.rvalue**2 >= 0.8 and fit.slope > 0, f"R^2={fit.rvalue**2:.3f}, slope={fit.slope:.3g}")


@pytest.mark.parametrize("name, cfg", [("a", SETTING_A), ("b", SETTING_B), ("c", SETTING_C)])
def test_c6_naive_gap(name, cfg):
    _, smart = run_experiment(cfg.with_(model="qm2"))
    _, naive = run_experiment(cfg.with_(model="qm2-naive"))
    margins = []
    for s, n in zip(smart["points"], naive["points"]):
        slack = 2 * math.hypot(s["se_queries"], n["se_queries"])
        margins.append((n["mean_queries"] - s["mean_queries"] + slack, s, n))
    m, s, n = min(margins, key=lambda t: t[0])
    ok = m > 0
    prev = ACCEPTANCE.get(6, (True, ""))
    detail = (prev[1] + "; " if prev[1] else "") + (
        f"({name}) tightest at {s['sweep_value']:.3g}: naive {n['mean_queries']:.0f} vs smart {s['mean_queries']:.0f}"
    )
    ACCEPTANCE[6] = (prev[0] and ok, detail)
    assert ok, detail


def test_c7_peaks(gamma_sweep_50):
    g = np.array([pt["gamma"] for pt in gamma_sweep_50])
    mean = np.array([pt["mean_queries"] for pt in gamma_sweep_50])
    bad = []
    for p in (0.1, 0.15, 0.2, 0.25, 0.3):
        i = int(np.argmin(np.abs(g - p)))
        if not (0 < i < len(g) - 1 and mean[i] > mean[i - 1] and mean[i] > mean[i + 1]):
            bad.append(p)
    report(7, not bad, "peaks at " + ", ".join(f"{g[np.argmin(np.abs(g - p))]:.3f}" for p in (0.1, 0.15, 0.2, 0.25, 0.3))
           + (f"; missing for p={bad}" if bad else ""))


def test_c8_kl_beats_alternatives(setting_a_bounds):
    out = setting_a_bounds
    worst = math.inf
    for alt in ("hoeffding", "bernstein"):
        for kl, other in zip(out["kl"], out[alt]):
            slack = 2 * math.hypot(kl["se_queries"], other["se_queries"])
            worst = min(worst, other["mean_queries"] - kl["mean_queries"] + slack)
    ratio = min(o["mean_queries"] / k["mean_queries"] for a in ("hoeffding", "bernstein") for k, o in zip(out["kl"], out[a]))
    report(8, worst >= 0, f"7 points; smallest alternative/KL mean ratio {ratio:.2f}")


def test_c9_math_oracles():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    fails = 0
    # (p_hat, n, beta) with beta = n d(p_hat||q*) so every root is representable
    for _ in range(10_000):
        p, q = rng.uniform(0.001, 0.999, 2)
        n = int(rng.integers(1, 10_001))
        beta = n * stats.kl_bern(p, q)
        bound = stats.kl_lcb(p, n, beta) if q < p else stats.kl_ucb(p, n, beta)
        fails += abs(n * stats.kl_bern(p, bound) - beta) > 1e-9
    grid = np.linspace(0.01, 0.99, 99)
    sym = sandwich = lemma = 0
    for x in grid:
        for y in grid:
            lemma += stats.lemma13_gap(x, y) < -1e-12
            if x == y:
                continue
            c = stats.chernoff_info(x, y)
            sym += c != stats.chernoff_info(y, x)
            m = 0.5 * (x + y)
            a, b = stats.kl_bern(m, x), stats.kl_bern(m, y)
            sandwich += not (min(a, b) - 1e-15 <= c <= max(a, b) + 1e-15)
    lam = 0
    for _ in range(1000):
        k = int(rng.integers(1, 50))
        delta = rng.uniform(0.01, 0.4)
        p, g = rng.uniform(0.01, 0.99, 2)
        if abs(p - g) < 1e-3:
            continue
        sched = stats.BetaSchedule("QM1", k, delta)
        lam += stats.classification_time(p, g, sched) > bounds.exit_time_term(p, g, 2.0, k, delta)
    wall = time.perf_counter() - start
    report(
        9,
        fails == sym == sandwich == lemma == lam == 0 and wall < 30,
        f"round-trip fails {fails}/10000, symmetry {sym}, sandwich {sandwich}, lemma13 {lemma}, "
        f"lambert {lam}; {wall:.1f}s (< 30s)",
    )


def test_c10_mws():
    rng = np.random.default_rng(10)
    mism = 0
    for _ in range(200):
        n = int(rng.integers(2, 17))
        w = np.triu(rng.choice([-1, 1], size=(n, n)), 1)
        g = SignedGraph(w + w.T)
        mism += extract_mws(g, rng=rng, exact_limit=0).weight != extract_mws(g).weight
    labels = np.repeat([0, 1], [12, 10])
    truth = {frozenset(range(12)), frozenset(range(12, 22))}
    intact = 0
    for _ in range(100):
        same = labels[:, None] == labels[None, :]
        flip = np.triu(rng.random(same.shape) < 0.1, 1)
        g = SignedGraph(np.where(same ^ (flip | flip.T), 1, -1))
        out = extract_all_bins(g, 4, rng=rng)
        intact += {frozenset(r.nodes) for r in out} == truth and len(out) == 2
    report(10, mism == 0 and intact >= 95, f"local vs exhaustive mismatches {mism}/200; planted intact {intact}/100")


def test_c11_qm2n_end_to_end():
    prob = Problem(make_explicit([0.7, 0.3]), 0.4, 0.25)
    ok = 0
    phase1 = set()
    overridden = True
    for seed in range(100):
        s = OracleSession("qm2n", prob.dist, seed, pe=0.1)
        res = run_qm2n(prob, s, t0=20, mws_seed=seed)
        ok += is_success(res, prob, s)
        phase1.add(res.metadata["phase1_queries"])
        overridden &= res.metadata["t0_override"]
    honest = stats.t0_qm2n(2, 0.25, 0.4, 0.1).t0
    report(
        11,
        ok >= 75 and phase1 == {190} and overridden,
        f"success {ok}/100, phase-1 queries {sorted(phase1)} (T0=20 override; closed-form T0={honest})",
    )
