"""Experiment configuration, validation and the flat key-value file format."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, fields, replace

import numpy as np

from ..dist import Distribution, DistributionError, check_separated, make_setting_a, make_zipf, parse_dist
from ..estimators import ESTIMATORS, BoundKind, qm1n_threshold, qm2n_threshold

SWEEP_AXES = ("p3", "gamma", "zipf-beta")
DEFAULT_ZIPF_K = 30


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


@dataclass(frozen=True)
class Sweep:
    axis: str
    start: float
    stop: float
    steps: int

    @classmethod
    def parse(cls, text: str) -> "Sweep":
        parts = text.split(":")
        if len(parts) != 4:
            raise ConfigError("sweep", f"expected axis:from:to:steps, got {text!r}")
        axis, a, b, n = parts
        try:
            return cls(axis, float(a), float(b), int(n))
        except ValueError as exc:
            raise ConfigError("sweep", f"malformed sweep {text!r}: {exc}") from None

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.steps)

    def __str__(self):
        return f"{self.axis}:{self.start:g}:{self.stop:g}:{self.steps}"


@dataclass(frozen=True)
class ExperimentConfig:
    model: str = "qm1"
    bound_kind: str = "kl"
    dist_spec: str = "explicit:0.3,0.25,0.2,0.15,0.1"
    gamma: float = 0.12
    delta: float = 0.1
    pe: float = 0.0
    sweep: Sweep | None = None
    trials: int = 15
    seed: int = 0
    out: str | None = None
    t0: int | None = None
    t0_cap: int = 5000
    workers: int = field(default_factory=lambda: os.cpu_count() or 1)
    # write wall_ms as 0 so repeated runs give byte-identical CSV files
    reproducible: bool = False

    def with_(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)

    def points(self) -> list[tuple[float, Distribution, float]]:
        """(sweep value, distribution, gamma) for each sweep point."""
        base = parse_dist(self.dist_spec)
        if self.sweep is None:
            return [(float("nan"), base, self.gamma)]
        out = []
        for v in self.sweep.values():
            v = float(v)
            if self.sweep.axis == "p3":
                out.append((v, make_setting_a(v), self.gamma))
            elif self.sweep.axis == "gamma":
                out.append((v, base, v))
            else:
                k = base.k if self.dist_spec.startswith("zipf:") else DEFAULT_ZIPF_K
                out.append((v, make_zipf(k, v), self.gamma))
        return out


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    """Check every parameter domain up front; raise ConfigError with the field path."""
    if cfg.model not in ESTIMATORS:
        raise ConfigError("model", f"unknown model {cfg.model!r}; choose from {sorted(ESTIMATORS)}")
    try:
        BoundKind(cfg.bound_kind)
    except ValueError:
        raise ConfigError("bound_kind", f"unknown bound {cfg.bound_kind!r}") from None
    for name in ("gamma", "delta"):
        v = getattr(cfg, name)
        if not (isinstance(v, (int, float)) and 0.0 < v < 1.0):
            raise ConfigError(name, f"must lie in (0, 1), got {v!r}")
    if not 0.0 <= cfg.pe < 0.5:
        raise ConfigError("pe", f"must lie in [0, 1/2), got {cfg.pe!r}")
    noisy = cfg.model in ("qm1n", "qm2n")
    if cfg.pe > 0 and not noisy:
        raise ConfigError("pe", f"model {cfg.model} is noiseless; pe must be 0")
    if cfg.model == "qm2n" and cfg.pe == 0 and cfg.t0 is None:
        raise ConfigError("pe", "qm2n needs pe > 0 unless t0 is overridden")
    if cfg.trials < 1:
        raise ConfigError("trials", f"must be >= 1, got {cfg.trials}")
    if cfg.workers < 1:
        raise ConfigError("workers", f"must be >= 1, got {cfg.workers}")
    if cfg.t0 is not None and cfg.t0 < 2:
        raise ConfigError("t0", f"must be >= 2, got {cfg.t0}")
    if cfg.sweep is not None:
        sw = cfg.sweep
        if sw.axis not in SWEEP_AXES:
            raise ConfigError("sweep.axis", f"unknown axis {sw.axis!r}; choose from {SWEEP_AXES}")
        if sw.steps < 1:
            raise ConfigError("sweep.steps", f"must be >= 1, got {sw.steps}")
        if not (math.isfinite(sw.start) and math.isfinite(sw.stop)):
            raise ConfigError("sweep", "range endpoints must be finite")
        if sw.axis == "gamma" and not (0 < min(sw.start, sw.stop) and max(sw.start, sw.stop) < 1):
            raise ConfigError("sweep", "gamma sweep must stay inside (0, 1)")
    try:
        points = cfg.points()
    except DistributionError as exc:
        raise ConfigError("dist_spec" if cfg.sweep is None else "sweep", str(exc)) from None
    for i, (_, dist, gamma) in enumerate(points):
        path = f"sweep[{i}]" if cfg.sweep is not None else "gamma"
        try:
            check_separated(dist.probs, gamma)
            if cfg.model == "qm1n":
                check_separated(
                    [(1 - cfg.pe) * p + cfg.pe / dist.k for p in dist.probs],
                    qm1n_threshold(gamma, cfg.pe, dist.k), "gamma'",
                )
            elif cfg.model == "qm2n":
                check_separated(
                    [(1 - 2 * cfg.pe) * p + cfg.pe for p in dist.probs], qm2n_threshold(gamma, cfg.pe), "gamma'"
                )
        except DistributionError as exc:
            raise ConfigError(path, str(exc)) from None
    return cfg


# -- flat key = value files --------------------------------------------------

_ALIASES = {"algo_bound": "bound_kind", "dist": "dist_spec"}


def _coerce(name: str, raw: str):
    kinds = {f.name: f.type for f in fields(ExperimentConfig)}
    if name not in kinds:
        raise ConfigError(name, "unknown configuration key")
    if name == "sweep":
        return Sweep.parse(raw)
    if name in ("t0",):
        return None if raw.lower() in ("", "none") else int(raw)
    if name in ("trials", "seed", "t0_cap", "workers"):
        return int(raw)
    if name in ("gamma", "delta", "pe"):
        return float(raw)
    if name == "reproducible":
        if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
            raise ConfigError(name, f"expected a boolean, got {raw!r}")
        return raw.lower() in ("true", "1", "yes")
    return raw


def normalize_key(key: str) -> str:
    key = key.strip().replace("-", "_")
    return _ALIASES.get(key, key)


def parse_value(key: str, raw: str):
    name = normalize_key(key)
    try:
        return name, _coerce(name, raw.strip())
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(name, f"cannot parse {raw!r}: {exc}") from None


def read_config_file(path: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment. Keys mirror the CLI flags."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}", f"expected key = value, got {line!r}")
            key, raw = line.split("=", 1)
            name, value = parse_value(key, raw)
            out[name] = value
    return out
