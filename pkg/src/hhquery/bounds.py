"""Closed-form query-complexity bounds for the six theorems.

Every function sorts P in descending order first, so m is the number of
elements strictly above gamma and p_m, p_{m+1} are the two elements that
straddle it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from . import stats
from .dist import check_separated


@dataclass(frozen=True)
class BoundReport:
    theorem: str
    value: float
    inputs: dict
    # noteworthy conditions, e.g. "m=0" when p_m does not exist
    flags: tuple[str, ...] = ()
    applicable: bool = True
    # 1-based index (in descending order) of the maximizing element, if any
    argmax: int | None = None
    terms: tuple[float, ...] = field(default=(), repr=False)

    def as_dict(self) -> dict:
        return {
            "theorem": self.theorem,
            "value": self.value,
            "flags": list(self.flags),
            "applicable": self.applicable,
            "argmax": self.argmax,
        }


def _sorted(probs: Sequence[float]) -> list[float]:
    return sorted((float(p) for p in probs), reverse=True)


def _split(probs: list[float], gamma: float) -> int:
    return sum(p > gamma for p in probs)


def _boundary(m: int, k: int) -> tuple[list[int], tuple[str, ...]]:
    """1-based indices j to maximize over, and flags for the edge cases."""
    if m == 0:
        return [1], ("m=0",)
    if m == k:
        return [k], ("m=k",)
    return [m, m + 1], ()


def _log_term(delta: float) -> float:
    # clamp: the bound is vacuous once 2.4 delta >= 1
    return max(0.0, math.log(1.0 / (2.4 * delta)))


def exit_time_term(p: float, gamma: float, factor: float, k: int, delta: float) -> float:
    """2e log(sqrt(factor k/delta) * 2/d*) / ((e-1) d*), with d* = d*(p, gamma)."""
    dstar = stats.chernoff_info(p, gamma)
    return stats.lambert_time_bound(dstar / 2.0, 0.5 * math.log(factor * k / delta))


def _inputs(probs, gamma, delta, pe=None) -> dict:
    out = {"P": list(probs), "gamma": gamma, "delta": delta}
    if pe is not None:
        out["pe"] = pe
    return out


def _max_over(js: list[int], values: list[float]) -> tuple[float, int]:
    best = max(range(len(js)), key=lambda i: values[i])
    return values[best], js[best]


def thm1_upper(probs: Sequence[float], gamma: float, delta: float) -> BoundReport:
    """High-probability query bound of the direct-query estimator."""
    check_separated(probs, gamma)
    p = _sorted(probs)
    k = len(p)
    js, flags = _boundary(_split(p, gamma), k)
    vals = [exit_time_term(p[j - 1], gamma, 2.0, k, delta) for j in js]
    value, arg = _max_over(js, vals)
    return BoundReport("thm1_upper", value, _inputs(probs, gamma, delta), flags, True, arg, tuple(vals))


def thm2_lower(probs: Sequence[float], gamma: float, delta: float) -> BoundReport:
    """Expected-query lower bound for any direct-query estimator."""
    check_separated(probs, gamma)
    p = _sorted(probs)
    k = len(p)
    js, flags = _boundary(_split(p, gamma), k)
    num = _log_term(delta)
    vals = [num / stats.kl_bern(p[j - 1], gamma) for j in js]
    value, arg = _max_over(js, vals)
    return BoundReport("thm2_lower", value, _inputs(probs, gamma, delta), flags, True, arg, tuple(vals))


def thm3_upper(probs: Sequence[float], gamma: float, delta: float) -> BoundReport:
    """High-probability query bound of the two-phase pairwise estimator.

    T' is taken as the integer phase-1 length the estimator actually runs.
    """
    check_separated(probs, gamma)
    p = _sorted(probs)
    k = len(p)
    m = _split(p, gamma)
    t_prime = stats.phase1_length_qm2(k, delta, gamma)
    q = min(k, t_prime)
    heavy = [max(exit_time_term(p[i], gamma, 4.0, k, delta), float(t_prime)) for i in range(m)]
    light = [exit_time_term(p[i], gamma, 4.0, k, delta) for i in range(m, q)]
    flags = ("m=0",) if m == 0 else ()
    report_inputs = _inputs(probs, gamma, delta) | {"t_prime": t_prime, "q": q}
    return BoundReport("thm3_upper", math.fsum(heavy + light), report_inputs, flags, True, None, tuple(heavy + light))


def thm4_lower(probs: Sequence[float], gamma: float, delta: float) -> BoundReport:
    """Expected-query lower bound for any pairwise estimator: half of thm2."""
    base = thm2_lower(probs, gamma, delta)
    return BoundReport(
        "thm4_lower", base.value / 2.0, base.inputs, base.flags, True, base.argmax, tuple(v / 2.0 for v in base.terms)
    )


def thm5_lower(probs: Sequence[float], gamma: float, delta: float) -> BoundReport:
    """Lower bound for the altered parallel-pull bandit setting.

    ``probs`` may be a sub-distribution; the bound only applies when
    sum(probs) + 2 gamma < 1, reported via ``applicable``.
    """
    check_separated(probs, gamma)
    p = _sorted(probs)
    num = _log_term(delta)
    terms = [num / (2.0 * stats.kl_bern(x, gamma)) for x in p]
    applicable = math.fsum(p) + 2.0 * gamma < 1.0
    flags = () if applicable else ("sum(P)+2gamma>=1",)
    return BoundReport("thm5_lower", math.fsum(terms), _inputs(probs, gamma, delta), flags, applicable, None, tuple(terms))


def thm6_upper(
    probs: Sequence[float], gamma: float, delta: float, pe: float, t0: int | None = None
) -> BoundReport:
    """High-probability query bound of the noisy pairwise estimator.

    ``t0`` overrides the phase-1 graph size (debug use); the override is
    flagged in the report.
    """
    p = _sorted(probs)
    k = len(p)
    scale = 1.0 - 2.0 * pe
    p_noisy = [scale * x + pe for x in p]
    g_noisy = scale * gamma + pe
    check_separated(p_noisy, g_noisy, "gamma'")
    flags: tuple[str, ...] = ()
    if t0 is None:
        t0 = stats.t0_qm2n(k, delta, gamma, pe).t0
    else:
        flags = ("t0-override",)
    q = min(t0, k)
    terms = [exit_time_term(x, g_noisy, 4.0, k, delta) for x in p_noisy[:q]]
    phase1 = t0 * (t0 - 1) / 2.0
    report_inputs = _inputs(probs, gamma, delta, pe) | {"t0": t0, "q": q, "gamma_prime": g_noisy}
    return BoundReport("thm6_upper", math.fsum(terms) + phase1, report_inputs, flags, True, None, tuple(terms))


def all_bounds(probs, gamma, delta, pe: float = 0.0, t0: int | None = None) -> dict[str, BoundReport]:
    out = {
        "thm1_upper": thm1_upper(probs, gamma, delta),
        "thm2_lower": thm2_lower(probs, gamma, delta),
        "thm3_upper": thm3_upper(probs, gamma, delta),
        "thm4_lower": thm4_lower(probs, gamma, delta),
        "thm5_lower": thm5_lower(probs, gamma, delta),
    }
    if pe > 0 or t0 is not None:
        out["thm6_upper"] = thm6_upper(probs, gamma, delta, pe, t0)
    return out
