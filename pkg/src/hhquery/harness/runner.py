"""Seeded Monte-Carlo trial batches, bound overlays and CSV/JSON output."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import binomtest

from .. import bounds, stats
from ..dist import Problem
from ..estimators import ESTIMATORS, BoundKind, InfeasibleT0Error, is_success, qm1n_threshold
from ..oracle import OracleSession
from .config import ConfigError, ExperimentConfig, validate

log = logging.getLogger(__name__)

CSV_HEADER = ["sweep_value", "trial", "seed", "success", "queries", "rounds", "thm_lower", "thm_upper", "wall_ms"]


@dataclass(frozen=True)
class ExperimentRecord:
    sweep_value: float
    trial: int
    seed: int
    success: bool
    queries: int
    rounds: int
    thm_lower: float
    thm_upper: float
    wall_ms: float


def trial_seed(base: int, point: int, trial: int) -> int:
    """Independent per-trial seed from a (base, point, trial) counter."""
    return int(np.random.SeedSequence([base, point, trial]).generate_state(1, dtype=np.uint64)[0])


def overlays(cfg: ExperimentConfig, probs, gamma) -> tuple[float, float]:
    """(lower, upper) theorem values matching the configured model."""
    delta = cfg.delta
    if cfg.model == "qm1":
        return bounds.thm2_lower(probs, gamma, delta).value, bounds.thm1_upper(probs, gamma, delta).value
    if cfg.model == "qm1n":
        k = len(probs)
        shifted = [(1 - cfg.pe) * p + cfg.pe / k for p in probs]
        g = qm1n_threshold(gamma, cfg.pe, k)
        return bounds.thm2_lower(shifted, g, delta).value, bounds.thm1_upper(shifted, g, delta).value
    if cfg.model in ("qm2", "qm2-naive"):
        return bounds.thm4_lower(probs, gamma, delta).value, bounds.thm3_upper(probs, gamma, delta).value
    # no lower bound is available for the noisy pairwise model
    return float("nan"), bounds.thm6_upper(probs, gamma, delta, cfg.pe, cfg.t0).value


def _one_trial(args) -> ExperimentRecord:
    cfg, value, dist, gamma, point, trial, lower, upper = args
    seed = trial_seed(cfg.seed, point, trial)
    model, fn = ESTIMATORS[cfg.model]
    problem = Problem(dist, gamma, cfg.delta)
    session = OracleSession(model, dist, seed, pe=cfg.pe)
    kw = {"bound": BoundKind(cfg.bound_kind)}
    if cfg.model == "qm2n":
        kw.update(t0=cfg.t0, t0_cap=cfg.t0_cap, mws_seed=seed)
    start = time.perf_counter()
    res = fn(problem, session, **kw)
    wall = 0.0 if cfg.reproducible else (time.perf_counter() - start) * 1e3
    return ExperimentRecord(value, trial, seed, is_success(res, problem, session), res.queries, res.rounds, lower, upper, wall)


def _point_summary(cfg, value, dist, gamma, recs, lower, upper) -> dict:
    q = np.array([r.queries for r in recs], dtype=float)
    succ = sum(r.success for r in recs)
    n = len(recs)
    probs = sorted(dist.probs, reverse=True)
    m = sum(p > gamma for p in probs)
    near = [probs[j] for j in (m - 1, m) if 0 <= j < len(probs)]
    std = float(q.std(ddof=1)) if n > 1 else 0.0
    return {
        "sweep_value": value,
        "gamma": gamma,
        "trials": n,
        "mean_queries": float(q.mean()),
        "std_queries": std,
        "se_queries": std / math.sqrt(n),
        "mean_rounds": float(np.mean([r.rounds for r in recs])),
        "success_rate": succ / n,
        # one-sided test of H0: success rate >= 1 - delta
        "binom_pvalue": float(binomtest(succ, n, 1 - cfg.delta, alternative="less").pvalue),
        "thm_lower": lower,
        "thm_upper": upper,
        "frac_within_upper": float(np.mean(q <= upper)),
        "inv_dstar_max": max(1.0 / stats.chernoff_info(p, gamma) for p in near),
        "inv_dstar_sum": float(sum(1.0 / stats.chernoff_info(p, gamma) for p in probs)),
    }


def run_experiment(cfg: ExperimentConfig) -> tuple[list[ExperimentRecord], dict]:
    """Run every sweep point; returns records in (point, trial) order and a summary."""
    cfg = validate(cfg)
    records: list[ExperimentRecord] = []
    points, skipped = [], []
    for idx, (value, dist, gamma) in enumerate(cfg.points()):
        try:
            lower, upper = overlays(cfg, dist.probs, gamma)
            if cfg.model == "qm2n":
                t0 = cfg.t0 if cfg.t0 is not None else stats.t0_qm2n(dist.k, cfg.delta, gamma, cfg.pe).t0
                if t0 > cfg.t0_cap:
                    raise InfeasibleT0Error(f"T0={t0} exceeds the cap {cfg.t0_cap}")
        except InfeasibleT0Error as exc:
            log.warning("skipping sweep point %s: %s", value, exc)
            skipped.append({"sweep_value": value, "reason": str(exc)})
            continue
        jobs = [(cfg, value, dist, gamma, idx, trial, lower, upper) for trial in range(cfg.trials)]
        if cfg.workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                recs = list(pool.map(_one_trial, jobs))
        else:
            recs = [_one_trial(j) for j in jobs]
        records.extend(recs)
        points.append(_point_summary(cfg, value, dist, gamma, recs, lower, upper))
    summary = {
        "config": _config_dict(cfg),
        "points": points,
        "skipped": skipped,
    }
    return records, summary


def compare_bounds(cfg: ExperimentConfig) -> dict:
    """Same seeds under each confidence-interval kind; direct-query model only."""
    if cfg.model != "qm1":
        raise ConfigError("model", "compare_bounds needs model qm1")
    out = {}
    for kind in BoundKind:
        _, summary = run_experiment(cfg.with_(bound_kind=kind.value))
        out[kind.value] = summary["points"]
    return out


def _config_dict(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    d["sweep"] = None if cfg.sweep is None else str(cfg.sweep)
    d.pop("workers")
    return d


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".9g")


def write_csv(path: str, records: list[ExperimentRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerow([_fmt(getattr(r, name)) for name in CSV_HEADER])


def write_json(path: str, summary: dict) -> None:
    def clean(x):
        if isinstance(x, float) and not math.isfinite(x):
            return None
        if isinstance(x, dict):
            return {k: clean(v) for k, v in x.items()}
        if isinstance(x, list):
            return [clean(v) for v in x]
        return x

    with open(path, "w", encoding="utf-8") as fh:
        json.dump(clean(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")
