"""Maximum weighted subgraph extraction on signed complete graphs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

EXACT_LIMIT = 20
RESTARTS = 32


@dataclass
class SignedGraph:
    """Complete graph with +/-1 edge weights and a mask of alive nodes.

    ``weights`` is a symmetric integer matrix; its diagonal is ignored.
    """

    weights: np.ndarray
    alive: np.ndarray = field(default=None)

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.int64)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError("weights must be a square matrix")
        if not np.array_equal(w, w.T):
            raise ValueError("weights must be symmetric")
        np.fill_diagonal(w, 0)
        self.weights = w
        if self.alive is None:
            self.alive = np.ones(w.shape[0], dtype=bool)
        else:
            self.alive = np.array(self.alive, dtype=bool)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def from_pairs(cls, n: int, i, j, w) -> "SignedGraph":
        mat = np.zeros((n, n), dtype=np.int64)
        mat[i, j] = w
        mat[j, i] = w
        return cls(mat)

    def alive_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.alive)

    def wt(self, nodes) -> int:
        idx = np.asarray(list(nodes), dtype=np.int64)
        if idx.size < 2:
            return 0
        return int(self.weights[np.ix_(idx, idx)].sum() // 2)

    def remove(self, nodes) -> None:
        self.alive[np.asarray(list(nodes), dtype=np.int64)] = False


@dataclass(frozen=True)
class MwsResult:
    nodes: tuple[int, ...]
    weight: int
    exact: bool

    def __len__(self):
        return len(self.nodes)


def _better(a: tuple[int, tuple[int, ...]], b: tuple[int, tuple[int, ...]] | None) -> bool:
    """Order by weight, then cardinality, then the lexicographically smaller set."""
    if b is None:
        return True
    (wa, na), (wb, nb) = a, b
    if wa != wb:
        return wa > wb
    if len(na) != len(nb):
        return len(na) > len(nb)
    return na < nb


def _exhaustive(w: np.ndarray) -> tuple[int, np.ndarray]:
    """Best subset of an m-node graph by enumerating all 2^m masks."""
    m = w.shape[0]
    wt = np.zeros(1, dtype=np.int64)
    pc = np.zeros(1, dtype=np.int8)
    for b in range(m):
        # gain of adding node b to each mask over nodes < b
        gain = np.zeros(1, dtype=np.int64)
        for j in range(b):
            gain = np.concatenate((gain, gain + w[b, j]))
        wt = np.concatenate((wt, wt + gain))
        pc = np.concatenate((pc, pc + 1))
    best = wt.max()
    cand = np.flatnonzero(wt == best)
    cand = cand[pc[cand] == pc[cand].max()]
    options = [tuple(b for b in range(m) if (mask >> b) & 1) for mask in cand.tolist()]
    return int(best), np.array(min(options), dtype=np.int64)


def _local_search(w: np.ndarray, start: np.ndarray) -> np.ndarray:
    """Steepest single-node add/remove ascent, then zero-gain additions."""
    x = start.copy()
    g = w @ x.astype(np.int64)
    while True:
        gain = np.where(x, -g, g)
        v = int(gain.argmax())
        if gain[v] <= 0:
            free = np.flatnonzero(~x & (g == 0))
            if free.size == 0:
                return x
            v = int(free[0])
        sign = -1 if x[v] else 1
        x[v] = not x[v]
        g += sign * w[:, v]


def extract_mws(
    graph: SignedGraph,
    rng: np.random.Generator | None = None,
    restarts: int = RESTARTS,
    exact_limit: int = EXACT_LIMIT,
) -> MwsResult:
    """Maximum weighted subgraph among the alive nodes of ``graph``."""
    nodes = graph.alive_nodes()
    if nodes.size == 0:
        raise ValueError("graph has no alive nodes")
    w = graph.weights[np.ix_(nodes, nodes)]
    if nodes.size <= exact_limit:
        weight, local = _exhaustive(w)
        return MwsResult(tuple(int(v) for v in nodes[local]), weight, True)

    rng = np.random.default_rng(0) if rng is None else rng
    m = nodes.size
    starts = [np.ones(m, dtype=bool)] + [rng.random(m) < 0.5 for _ in range(restarts)]
    best = None
    for start in starts:
        x = _local_search(w, start)
        chosen = tuple(int(v) for v in nodes[x])
        cand = (graph.wt(chosen), chosen)
        if _better(cand, best):
            best = cand
    return MwsResult(best[1], best[0], False)


def extract_all_bins(
    graph: SignedGraph,
    s0: float,
    rng: np.random.Generator | None = None,
    **kwargs,
) -> list[MwsResult]:
    """Repeatedly extract and remove the MWS while it has more than s0 nodes.

    Mutates ``graph.alive``.
    """
    out = []
    while graph.alive.any():
        res = extract_mws(graph, rng=rng, **kwargs)
        if len(res) <= s0:
            break
        out.append(res)
        graph.remove(res.nodes)
    return out
