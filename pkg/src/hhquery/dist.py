"""Hidden categorical distributions, their constructors, and ground truth."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

SUM_TOL = 1e-9
# minimum |p_i - gamma| for a problem to count as strictly separated
SEPARATION_TOL = 1e-12


class DistributionError(ValueError):
    pass


@dataclass(frozen=True)
class Distribution:
    """Categorical distribution over the support ``{1, ..., k}``.

    ``probs[i - 1]`` is the mass of support element ``i``.
    """

    probs: tuple[float, ...]

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        if len(probs) < 1:
            raise DistributionError("distribution needs at least one support element")
        if any(not math.isfinite(p) or p < 0 for p in probs):
            raise DistributionError(f"probabilities must be finite and >= 0, got {probs}")
        total = math.fsum(probs)
        if abs(total - 1.0) > SUM_TOL:
            raise DistributionError(f"probabilities sum to {total!r}, expected 1")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "_cdf", _cdf(probs))

    @property
    def k(self) -> int:
        return len(self.probs)

    def p(self, i: int) -> float:
        """Mass of the 1-based support element ``i``."""
        return self.probs[i - 1]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)

    def sample(self, rng: np.random.Generator, size: int | None = None):
        """Draw 1-based support indices by inverse-CDF lookup."""
        u = rng.random(size)
        idx = np.searchsorted(self._cdf, u, side="right") + 1
        if size is None:
            return int(idx)
        return idx.astype(np.int32)


def _cdf(probs: Sequence[float]) -> np.ndarray:
    cdf = np.cumsum(np.asarray(probs, dtype=float))
    cdf /= cdf[-1]
    # guard against u landing past the last bucket from rounding
    cdf[-1] = 1.0
    # zero-mass elements must never be sampled; searchsorted(side=right)
    # already skips a bucket whose upper edge equals its lower edge
    return cdf


def sample(dist: Distribution, rng: np.random.Generator, size: int | None = None):
    return dist.sample(rng, size)


@dataclass(frozen=True)
class Problem:
    dist: Distribution
    gamma: float
    delta: float

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise DistributionError(f"gamma must lie in (0,1), got {self.gamma}")
        if not 0.0 < self.delta < 1.0:
            raise DistributionError(f"delta must lie in (0,1), got {self.delta}")
        check_separated(self.dist.probs, self.gamma)

    @property
    def k(self) -> int:
        return self.dist.k


def check_separated(probs: Sequence[float], threshold: float, what: str = "gamma") -> None:
    for i, p in enumerate(probs, start=1):
        if abs(p - threshold) < SEPARATION_TOL:
            raise DistributionError(
                f"p_{i}={p!r} coincides with {what}={threshold!r}; "
                "the threshold must strictly separate the support"
            )


def ground_truth(problem: Problem) -> frozenset[int]:
    """Support elements strictly above the threshold, 1-based."""
    return frozenset(i for i, p in enumerate(problem.dist.probs, start=1) if p > problem.gamma)


def make_explicit(probs: Sequence[float]) -> Distribution:
    return Distribution(tuple(probs))


def make_zipf(k: int, beta: float) -> Distribution:
    if k < 1:
        raise DistributionError(f"k must be >= 1, got {k}")
    if beta < 0:
        raise DistributionError(f"Zipf exponent must be >= 0, got {beta}")
    weights = [i ** (-beta) for i in range(1, k + 1)]
    total = math.fsum(weights)
    return Distribution(tuple(w / total for w in weights))


def make_setting_a(p3: float) -> Distribution:
    """k=30 instance with p1=0.35, p2=0.28, p3 given and a uniform tail."""
    if not 0.13 <= p3 <= 0.19:
        raise DistributionError(f"p3 must lie in [0.13, 0.19], got {p3}")
    head = (0.35, 0.28, p3)
    tail = (1.0 - math.fsum(head)) / 27
    return Distribution(head + (tail,) * 27)


def parse_dist(spec: str) -> Distribution:
    """Parse ``explicit:a,b,..`` | ``zipf:<beta>:<k>`` | ``setting-a:<p3>``."""
    kind, _, rest = spec.strip().partition(":")
    try:
        if kind == "explicit":
            return make_explicit([float(x) for x in rest.split(",")])
        if kind == "zipf":
            beta, k = rest.split(":")
            return make_zipf(int(k), float(beta))
        if kind == "setting-a":
            return make_setting_a(float(rest))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, DistributionError):
            raise
        raise DistributionError(f"malformed distribution literal {spec!r}: {exc}") from exc
    raise DistributionError(f"unknown distribution kind in {spec!r}")
