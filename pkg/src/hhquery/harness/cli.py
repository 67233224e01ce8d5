"""Command-line entry point: ``hhquery {run,bounds,selftest}``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from .. import bounds, stats
from ..dist import DistributionError, parse_dist
from ..estimators import QueryBudgetExceeded
from . import selftest
from .config import ConfigError, ExperimentConfig, parse_value, read_config_file, validate
from .runner import compare_bounds, run_experiment, write_csv, write_json

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_ABORT = 3

# CLI flag -> ExperimentConfig field
_RUN_FLAGS = {
    "model": "model",
    "algo_bound": "bound_kind",
    "dist": "dist_spec",
    "gamma": "gamma",
    "delta": "delta",
    "pe": "pe",
    "sweep": "sweep",
    "trials": "trials",
    "seed": "seed",
    "out": "out",
    "t0": "t0",
    "t0_cap": "t0_cap",
    "workers": "workers",
}


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hhquery", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a seeded Monte-Carlo experiment")
    run.add_argument("--config", help="flat key = value file; flags override it")
    run.add_argument("--model", choices=["qm1", "qm1n", "qm2", "qm2-naive", "qm2n"])
    run.add_argument("--algo-bound", choices=["kl", "hoeffding", "bernstein"])
    run.add_argument("--dist", help="explicit:a,b,... | zipf:<beta>:<k> | setting-a:<p3>")
    run.add_argument("--gamma")
    run.add_argument("--delta")
    run.add_argument("--pe")
    run.add_argument("--sweep", help="axis:from:to:steps with axis in p3, gamma, zipf-beta")
    run.add_argument("--trials")
    run.add_argument("--seed")
    run.add_argument("--out", help="CSV path; the JSON summary goes next to it")
    run.add_argument("--t0", help="debug override of the noisy-pairwise phase-1 size")
    run.add_argument("--t0-cap")
    run.add_argument("--workers")
    run.add_argument("--reproducible", action="store_true", help="write wall_ms as 0")
    run.add_argument("--compare-bounds", action="store_true", help="run KL, Hoeffding and Bernstein on the same seeds")

    b = sub.add_parser("bounds", help="print every theorem value as JSON")
    b.add_argument("--dist", required=True)
    b.add_argument("--gamma", type=float, required=True)
    b.add_argument("--delta", type=float, required=True)
    b.add_argument("--pe", type=float, default=0.0)
    b.add_argument("--t0", type=int)

    sub.add_parser("selftest", help="run the built-in invariant checks")
    return ap


def build_config(ns: argparse.Namespace) -> ExperimentConfig:
    values = read_config_file(ns.config) if ns.config else {}
    for flag, name in _RUN_FLAGS.items():
        raw = getattr(ns, flag)
        if raw is not None:
            key, val = parse_value(name, str(raw))
            values[key] = val
    if ns.reproducible:
        values["reproducible"] = True
    return validate(ExperimentConfig(**values))


def _cmd_run(ns) -> int:
    cfg = build_config(ns)
    if ns.compare_bounds:
        result = compare_bounds(cfg)
        text = json.dumps(result, indent=2, sort_keys=True, default=str)
        if cfg.out:
            Path(cfg.out).with_suffix(".json").write_text(text + "\n", encoding="utf-8")
        print(text)
        return EXIT_OK
    records, summary = run_experiment(cfg)
    if not summary["points"]:
        print("no sweep point could run: " + "; ".join(s["reason"] for s in summary["skipped"]), file=sys.stderr)
        return EXIT_ABORT
    if cfg.out:
        write_csv(cfg.out, records)
        write_json(str(Path(cfg.out).with_suffix(".json")), summary)
    for pt in summary["points"]:
        print(
            f"{pt['sweep_value']:.6g}\tmean_queries={pt['mean_queries']:.6g}\t"
            f"success={pt['success_rate']:.3f}\tthm_upper={pt['thm_upper']:.6g}"
        )
    return EXIT_OK


def _cmd_bounds(ns) -> int:
    dist = parse_dist(ns.dist)
    if not (0 < ns.gamma < 1 and 0 < ns.delta < 1):
        raise ConfigError("gamma/delta", "must lie in (0, 1)")
    reports = bounds.all_bounds(dist.probs, ns.gamma, ns.delta, ns.pe, ns.t0)
    out = {name: r.as_dict() for name, r in reports.items()}
    out["t_prime"] = stats.phase1_length_qm2(dist.k, ns.delta, ns.gamma)
    if ns.pe > 0:
        c = stats.t0_qm2n(dist.k, ns.delta, ns.gamma, ns.pe)
        out["t0"] = c.t0
        out["s0"] = c.s0
    clean = {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in out.items()}
    print(json.dumps(clean, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_selftest(ns) -> int:
    results = selftest.run()
    for name, ok in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return EXIT_OK if all(ok for _, ok in results) else EXIT_FAIL


def main(argv=None) -> int:
    ns = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if ns.command == "run":
            return _cmd_run(ns)
        if ns.command == "bounds":
            return _cmd_bounds(ns)
        return _cmd_selftest(ns)
    except (ConfigError, DistributionError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except QueryBudgetExceeded as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
