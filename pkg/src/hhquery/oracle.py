"""Seeded simulators of the four oracle query models.

A session owns a lazily grown hidden sample stream X_1, X_2, ... and answers
queries about it according to its model. Every call to a query method is
charged to the session's query count, repeats included.
"""

from __future__ import annotations

import enum

import numpy as np

from .dist import Distribution

CHUNK = 8192

_M1 = np.uint64(0x9E3779B97F4A7C15)
_M2 = np.uint64(0xC2B2AE3D27D4EB4F)
_F1 = np.uint64(0xBF58476D1CE4E5B9)
_F2 = np.uint64(0x94D049BB133111EB)


class OracleError(ValueError):
    """A query that the session's model does not allow."""


class QueryModel(str, enum.Enum):
    QM1 = "qm1"
    QM1N = "qm1n"
    QM2 = "qm2"
    QM2N = "qm2n"

    @property
    def direct(self) -> bool:
        return self in (QueryModel.QM1, QueryModel.QM1N)

    @property
    def noisy(self) -> bool:
        return self in (QueryModel.QM1N, QueryModel.QM2N)


def _splitmix(x: np.ndarray) -> np.ndarray:
    x = x ^ (x >> np.uint64(30))
    x = x * _F1
    x = x ^ (x >> np.uint64(27))
    x = x * _F2
    return x ^ (x >> np.uint64(31))


class OracleSession:
    """One seeded oracle for a single estimator run.

    Not thread-safe: the sample buffer and query counter are mutated by
    every call. Use one session per trial.
    """

    def __init__(self, model, dist: Distribution, seed: int, pe: float = 0.0):
        self.model = QueryModel(model)
        self.dist = dist
        self.seed = int(seed)
        self.pe = float(pe)
        if not 0.0 <= self.pe < 0.5:
            raise OracleError(f"noise rate must lie in [0, 1/2), got {pe}")
        if self.pe > 0 and not self.model.noisy:
            raise OracleError(f"model {self.model.value} is noiseless but pe={pe}")

        sample_ss, noise_ss = np.random.SeedSequence(self.seed).spawn(2)
        self._sample_rng = np.random.default_rng(sample_ss)
        self._noise_rng = np.random.default_rng(noise_ss)
        self._pair_key = noise_ss.generate_state(2, dtype=np.uint64)

        self._x = np.zeros(0, dtype=np.int32)
        self._resp = self._x  # QM1N responses, aligned with _x
        self._filled = 0
        self._queries = 0

    # -- hidden stream -------------------------------------------------

    def _ensure(self, n: int) -> None:
        """Materialize samples up to (1-based) index n."""
        if n <= self._filled:
            return
        need = -(-(n - self._filled) // CHUNK) * CHUNK
        new_size = self._filled + need
        if new_size > self._x.size:
            cap = max(new_size, 2 * self._x.size)
            x = np.empty(cap, dtype=np.int32)
            x[: self._filled] = self._x[: self._filled]
            self._x = x
            if self.model is QueryModel.QM1N:
                r = np.empty(cap, dtype=np.int32)
                r[: self._filled] = self._resp[: self._filled]
                self._resp = r
        for start in range(self._filled, new_size, CHUNK):
            block = self.dist.sample(self._sample_rng, CHUNK)
            self._x[start : start + CHUNK] = block
            if self.model is QueryModel.QM1N:
                flip = self._noise_rng.random(CHUNK) < self.pe
                uniform = self._noise_rng.integers(1, self.dist.k + 1, CHUNK)
                self._resp[start : start + CHUNK] = np.where(flip, uniform, block)
        self._filled = new_size

    def _flip(self, i: np.ndarray, j: np.ndarray) -> np.ndarray:
        """Persistent per-unordered-pair flip indicators Z_{i,j}."""
        lo = np.minimum(i, j).astype(np.uint64)
        hi = np.maximum(i, j).astype(np.uint64)
        with np.errstate(over="ignore"):
            h = _splitmix(self._pair_key[0] ^ (lo * _M1))
            h = _splitmix(h ^ (hi * _M2) ^ self._pair_key[1])
        u = (h >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)
        return u < self.pe

    # -- estimator-facing surface ---------------------------------------

    @property
    def query_count(self) -> int:
        return self._queries

    def _require(self, direct: bool) -> None:
        if self.model.direct != direct:
            kind = "value" if direct else "pairwise"
            raise OracleError(f"{kind} query not allowed under {self.model.value}")

    def query_value(self, i: int) -> int:
        """Direct query of sample i (QM1 / QM1N)."""
        return int(self.query_values(np.array([i]))[0])

    def query_values(self, indices) -> np.ndarray:
        """Direct queries for a batch of sample indices, charged one each."""
        self._require(direct=True)
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size == 0:
            return np.zeros(0, dtype=np.int32)
        if idx.min() < 1:
            raise OracleError("sample indices are 1-based")
        self._ensure(int(idx.max()))
        self._queries += idx.size
        src = self._resp if self.model is QueryModel.QM1N else self._x
        return src[idx - 1]

    def _pair_responses(self, i: np.ndarray, j: np.ndarray) -> np.ndarray:
        if np.any(i == j):
            raise OracleError("pairwise query needs two distinct indices")
        if min(i.min(), j.min()) < 1:
            raise OracleError("sample indices are 1-based")
        self._ensure(int(max(i.max(), j.max())))
        same = self._x[i - 1] == self._x[j - 1]
        if self.model is QueryModel.QM2N:
            same = same ^ self._flip(i, j)
        return np.where(same, 1, -1).astype(np.int8)

    def query_pair(self, i: int, j: int) -> int:
        """Pairwise query: +1 if samples i and j look equal, else -1."""
        return int(self.query_pairs(np.array([i]), np.array([j]))[0])

    def query_pairs(self, i, j) -> np.ndarray:
        """Elementwise pairwise queries, charged one per pair."""
        self._require(direct=False)
        i, j = np.broadcast_arrays(np.asarray(i, dtype=np.int64), np.asarray(j, dtype=np.int64))
        if i.size == 0:
            return np.zeros(i.shape, dtype=np.int8)
        out = self._pair_responses(i.ravel(), j.ravel()).reshape(i.shape)
        self._queries += i.size
        return out

    def first_match(self, samples, reps) -> np.ndarray:
        """Compare each sample against ``reps`` in order, stopping at the first +1.

        Returns, per sample, the position in ``reps`` of the first positive
        response or -1. Charges exactly the queries the sequential scan makes.
        """
        self._require(direct=False)
        samples = np.asarray(samples, dtype=np.int64)
        reps = np.asarray(reps, dtype=np.int64)
        if samples.size == 0:
            return np.zeros(0, dtype=np.int64)
        if reps.size == 0:
            return np.full(samples.size, -1, dtype=np.int64)
        ii, jj = np.meshgrid(reps, samples)
        pos = self._pair_responses(ii.ravel(), jj.ravel()).reshape(ii.shape) > 0
        hit = pos.any(axis=1)
        where = np.where(hit, pos.argmax(axis=1), -1)
        self._queries += int(np.where(hit, where + 1, reps.size).sum())
        return where

    # -- test-only backdoor ---------------------------------------------

    def debug_truth(self, i: int) -> int:
        """Hidden value X_i. For tests and success scoring only."""
        self._ensure(int(i))
        return int(self._x[int(i) - 1])

    def debug_truths(self, indices) -> np.ndarray:
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size:
            self._ensure(int(idx.max()))
        return self._x[idx - 1].copy()
