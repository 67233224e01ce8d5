"""Scalar statistics for Bernoulli confidence bounds and exit-time constants.

All logarithms are natural.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import rel_entr

log = logging.getLogger(__name__)

BISECT_TOL = 1e-12
BISECT_MAX_ITER = 200


def kl_bern(p, q):
    """Bernoulli KL divergence d(p||q) on the extended reals.

    Works elementwise on arrays; scalar inputs give a float.
    """
    out = rel_entr(p, q) + rel_entr(1.0 - np.asarray(p, dtype=float), 1.0 - np.asarray(q, dtype=float))
    if np.ndim(out) == 0:
        return float(out)
    return out


def chernoff_info(x: float, y: float) -> float:
    """Chernoff information d*(x, y) between Bernoulli(x) and Bernoulli(y).

    The crossover point z with d(z||x) = d(z||y) solves a linear equation
    because the z*log(z) terms cancel, so no root finding is needed.
    """
    lo, hi = (x, y) if x <= y else (y, x)
    if lo == hi:
        return 0.0
    # degenerate endpoints: the crossover point slides to the boundary
    if hi >= 1.0:
        return kl_bern(1.0, lo)
    if lo <= 0.0:
        return kl_bern(0.0, hi)
    z = crossover_point(lo, hi)
    # average of the two (equal) divergences keeps the result order-free
    return 0.5 * (kl_bern(z, lo) + kl_bern(z, hi))


def crossover_point(x: float, y: float) -> float:
    lo, hi = (x, y) if x <= y else (y, x)
    a = math.log(hi / lo)
    b = math.log((1.0 - lo) / (1.0 - hi))
    return b / (a + b)


def _bisect(fn, lo: float, hi: float, done=None) -> tuple[float, float]:
    """Shrink [lo, hi] around the sign change of ``fn`` (fn(lo) true, fn(hi) false).

    Stops once the bracket is narrower than BISECT_TOL and ``done(lo, hi)``
    (if given) holds, when it collapses to adjacent floats, or after
    BISECT_MAX_ITER halvings.
    """
    for _ in range(BISECT_MAX_ITER):
        if hi - lo <= BISECT_TOL and (done is None or done(lo, hi)):
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if fn(mid):
            lo = mid
        else:
            hi = mid
    return lo, hi


# target accuracy of n*d(p_hat||bound) against beta for the KL inversions
KL_VALUE_TOL = 1e-10


def kl_lcb(p_hat: float, n: int, beta: float) -> float:
    """Smallest q <= p_hat with n * d(p_hat||q) <= beta."""
    if p_hat <= 0.0 or beta <= 0.0:
        return max(p_hat, 0.0)
    if n * kl_bern(p_hat, 0.0) <= beta:
        return 0.0
    # d(p_hat||q) decreases in q on [0, p_hat]; keep the feasible end
    gap = lambda q: beta - n * kl_bern(p_hat, q)
    _, q = _bisect(lambda q: gap(q) < 0, 0.0, p_hat, lambda lo, hi: gap(hi) <= KL_VALUE_TOL)
    return q


def kl_ucb(p_hat: float, n: int, beta: float) -> float:
    """Largest q >= p_hat with n * d(p_hat||q) <= beta."""
    if p_hat >= 1.0 or beta <= 0.0:
        return min(p_hat, 1.0)
    if n * kl_bern(p_hat, 1.0) <= beta:
        return 1.0
    gap = lambda q: beta - n * kl_bern(p_hat, q)
    q, _ = _bisect(lambda q: gap(q) >= 0, p_hat, 1.0, lambda lo, hi: gap(lo) <= KL_VALUE_TOL)
    return q


@dataclass(frozen=True)
class ConfidenceInterval:
    lcb: float
    ucb: float

    def __post_init__(self):
        if not 0.0 <= self.lcb <= self.ucb <= 1.0:
            raise ValueError(f"invalid interval [{self.lcb}, {self.ucb}]")

    def contains(self, x: float) -> bool:
        return self.lcb <= x <= self.ucb

    def straddles(self, threshold: float) -> bool:
        return self.lcb < threshold < self.ucb


def kl_interval(p_hat: float, n: int, beta: float) -> ConfidenceInterval:
    return ConfidenceInterval(kl_lcb(p_hat, n, beta), kl_ucb(p_hat, n, beta))


def hoeffding_interval(p_hat: float, n: int, beta: float) -> ConfidenceInterval:
    if n < 1:
        raise ValueError("Hoeffding interval needs n >= 1")
    w = math.sqrt(beta / (2.0 * n))
    return ConfidenceInterval(max(0.0, p_hat - w), min(1.0, p_hat + w))


def bernstein_halfwidth(var_hat: float, n: int, beta: float) -> float:
    # Maurer-Pontil empirical Bernstein form
    return math.sqrt(2.0 * var_hat * beta / n) + 7.0 * beta / (3.0 * (n - 1))


def bernstein_interval(p_hat: float, var_hat: float, n: int, beta: float) -> ConfidenceInterval:
    if n < 2:
        raise ValueError("empirical Bernstein interval needs n >= 2")
    w = bernstein_halfwidth(var_hat, n, beta)
    return ConfidenceInterval(max(0.0, p_hat - w), min(1.0, p_hat + w))


def bernoulli_sample_variance(p_hat: float, n: int) -> float:
    """Unbiased sample variance of n Bernoulli draws with mean p_hat."""
    if n < 2:
        return 0.0
    return n / (n - 1) * p_hat * (1.0 - p_hat)


class ScheduleKind(str, enum.Enum):
    QM1 = "QM1"
    QM2 = "QM2"
    QM2N = "QM2N"


@dataclass(frozen=True)
class BetaSchedule:
    """Confidence level beta^t as a function of the round ``t``.

    QM1 uses log(2 k t^2 / delta); QM2 uses log(4 k t^2 / delta); QM2N uses
    log(4 k (t - t0)^2 / delta), counting only rounds after phase 1.
    """

    kind: ScheduleKind
    k: int
    delta: float
    t0: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", ScheduleKind(self.kind))

    @property
    def factor(self) -> float:
        return 2.0 if self.kind is ScheduleKind.QM1 else 4.0

    @property
    def offset(self) -> int:
        return self.t0 if self.kind is ScheduleKind.QM2N else 0

    def effective_n(self, t: int) -> int:
        return t - self.offset

    def beta(self, t):
        n = np.asarray(t, dtype=float) - self.offset
        out = np.log(self.factor * self.k / self.delta) + 2.0 * np.log(n)
        if np.ndim(out) == 0:
            return float(out)
        return out

    def lambert_b(self) -> float:
        return 0.5 * math.log(self.factor * self.k / self.delta)


def lambert_time_bound(a: float, b: float) -> float:
    """Closed-form upper bound on the largest root of t*2a = 2b + 2 log t."""
    if a <= 0:
        raise ValueError("lambert_time_bound needs a > 0")
    return max(0.0, math.e * (b - math.log(a)) / ((math.e - 1.0) * a))


def classification_time(p: float, gamma: float, schedule: BetaSchedule, chunk: int = 1 << 20) -> int:
    """Exit round T: every later round t satisfies n_t * d*(p, gamma) > beta^t.

    n_t is the effective sample count (t, or t - t0 for QM2N). The scan
    covers every n up to one past the Lambert-function ceiling; returns the
    round of the last violation, or ``schedule.offset`` if there is none.
    """
    if p == gamma:
        raise ValueError("classification_time needs p != gamma")
    dstar = chernoff_info(p, gamma)
    ceiling = math.ceil(lambert_time_bound(dstar / 2.0, schedule.lambert_b())) + 1
    last = 0
    const = math.log(schedule.factor * schedule.k / schedule.delta)
    for start in range(1, ceiling + 1, chunk):
        n = np.arange(start, min(start + chunk, ceiling + 1), dtype=float)
        bad = np.nonzero(n * dstar <= const + 2.0 * np.log(n))[0]
        if bad.size:
            last = int(n[bad[-1]])
    return schedule.offset + last


def phase1_length_qm2(k: int, delta: float, gamma: float) -> int:
    """Rounds needed so every element above gamma has been seen w.h.p."""
    return math.ceil(math.log(2.0 * k / delta) / math.log(1.0 / (1.0 - gamma)))


@dataclass(frozen=True)
class NoisyConstants:
    pe: float
    c1: float
    c2: float
    k1p: float
    k2p: float
    c: float
    t0_raw: float
    t0: int
    s0: float


def largest_fixed_point(a: float) -> float:
    """Largest root of exp(a x) = x, or 0 when no real root exists (a > 1/e)."""
    if a > 1.0 / math.e:
        return 0.0
    f = lambda x: math.exp(a * x) - x
    lo = 1.0 / a
    hi = 2.0 * lo
    while f(hi) <= 0:
        lo, hi = hi, 2.0 * hi
    lo, hi = _bisect(lambda x: f(x) <= 0, lo, hi)
    return hi


def t0_qm2n(k: int, delta: float, gamma: float, pe: float) -> NoisyConstants:
    """Phase-1 graph size T0 and MWS size cutoff S0 for the noisy pairwise model."""
    if not 0.0 < pe < 0.5:
        raise ValueError(f"pe must lie in (0, 1/2), got {pe}")
    a = (1.0 - 2.0 * pe) ** 2
    c1 = math.log(2.0) + 1.0
    c2 = 0.75 * a
    k1p = math.e / (2.0 * math.pi)
    k2p = 0.5 * math.exp(2.0 * a)
    if a > 1.0 / math.e:
        log.warning("exp(x(1-2pe)^2) = x has no real root for pe=%s; using c = 0", pe)
    c = largest_fixed_point(a)
    r = math.e / (math.e - 1.0)
    terms = (
        c,
        2.0 * c1 / c2,
        c1 / (2.0 * c2) + math.sqrt((1.0 / c2) * r * (math.log(16.0 * k * k1p / (c2 * delta)) + c1**2 / (4.0 * c2))),
        r * math.log(k2p / a * math.sqrt(16.0 * k / delta)) / a,
        1.0 + 33.0 * math.log(16.0 * k / delta) / a,
    )
    t0_raw = 4.0 / gamma * max(terms)
    t0 = math.ceil(t0_raw)
    return NoisyConstants(pe, c1, c2, k1p, k2p, c, t0_raw, t0, gamma * t0_raw / 4.0)


def lemma13_gap(p: float, gamma: float) -> float:
    """2 d(p||gamma) minus the surrogate divergence used in the altered-MAB bound."""
    surrogate = float(rel_entr(p, gamma) + 2.0 * gamma * math.log(2.0 * gamma / (p + gamma)))
    return 2.0 * kl_bern(p, gamma) - surrogate
