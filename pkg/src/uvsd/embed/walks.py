"""Second-order biased random walks (return parameter p, in-out parameter q)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._accel import njit, pick
from ..graph import NormalizedSubgraph
from ..seeding import derive_rng


@dataclass(frozen=True)
class WalkConfig:
    p: float = 0.5
    q: float = 0.5
    walk_length: int = 20
    walks_per_node: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.p <= 0 or self.q <= 0:
            raise ValueError("p and q must be positive")
        if self.walk_length < 2:
            raise ValueError("walk_length must be >= 2")
        if self.walks_per_node < 1:
            raise ValueError("walks_per_node must be >= 1")


@dataclass(frozen=True)
class CSRGraph:
    ids: tuple
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return len(self.ids)

    def dense(self) -> np.ndarray:
        W = np.zeros((self.n, self.n))
        for i in range(self.n):
            lo, hi = self.indptr[i], self.indptr[i + 1]
            W[i, self.indices[lo:hi]] = self.weights[lo:hi]
        return W


def to_csr(graph: NormalizedSubgraph) -> CSRGraph:
    """Neighbor lists sorted by node position."""
    ids = tuple(graph.node_ids)
    pos = {nid: i for i, nid in enumerate(ids)}
    rows = [[] for _ in ids]
    for e in graph.edges:
        a, b = pos[e.src], pos[e.dst]
        rows[a].append((b, e.weight))
        rows[b].append((a, e.weight))
    indptr = np.zeros(len(ids) + 1, dtype=np.int64)
    indices, weights = [], []
    for i, row in enumerate(rows):
        row.sort()
        indptr[i + 1] = indptr[i] + len(row)
        indices.extend(j for j, _ in row)
        weights.extend(w for _, w in row)
    return CSRGraph(ids, indptr, np.asarray(indices, dtype=np.int64), np.asarray(weights, dtype=np.float64))


def search_bias(prev, target, adjacency: dict, p: float, q: float) -> float:
    """Bias factor for stepping to ``target`` having arrived from ``prev``."""
    if target == prev:
        return 1.0 / p
    if target in adjacency[prev]:
        return 1.0
    return 1.0 / q


def transition_distribution(prev, current, graph: NormalizedSubgraph, p: float, q: float) -> dict:
    """Exact next-step probabilities from ``current``; ``prev=None`` gives the
    first (weight-proportional) step. Non-neighbors are absent (probability 0)."""
    adj = graph.adjacency
    nbrs = adj[current]
    if not nbrs:
        raise ValueError(f"node {current!r} has no neighbors")
    scores = {}
    for mu, w in nbrs.items():
        lam = 1.0 if prev is None else search_bias(prev, mu, adj, p, q)
        scores[mu] = lam * w
    z = sum(scores.values())
    return {mu: s / z for mu, s in scores.items()}


@njit
def _walks_numba(indptr, indices, weights, starts, uniforms, inv_p, inv_q, length):
    n_walks = starts.shape[0]
    out = np.full((n_walks, length), -1, dtype=np.int64)
    max_deg = 0
    for i in range(indptr.shape[0] - 1):
        max_deg = max(max_deg, indptr[i + 1] - indptr[i])
    cum = np.empty(max(max_deg, 1))
    for w in range(n_walks):
        cur = starts[w]
        prev = -1
        out[w, 0] = cur
        for s in range(1, length):
            lo = indptr[cur]
            hi = indptr[cur + 1]
            if hi == lo:
                break
            total = 0.0
            for k in range(lo, hi):
                x = indices[k]
                if prev < 0:
                    lam = 1.0
                elif x == prev:
                    lam = inv_p
                else:
                    plo = indptr[prev]
                    phi = indptr[prev + 1]
                    pos = plo + np.searchsorted(indices[plo:phi], x)
                    if pos < phi and indices[pos] == x:
                        lam = 1.0
                    else:
                        lam = inv_q
                total += weights[k] * lam
                cum[k - lo] = total
            target = uniforms[w, s - 1] * total
            j = 0
            while cum[j] <= target:
                j += 1
            prev = cur
            cur = indices[lo + j]
            out[w, s] = cur
    return out


def _walks_numpy(indptr, indices, weights, starts, uniforms, inv_p, inv_q, length, block=2048):
    n = indptr.shape[0] - 1
    W = np.zeros((n, n))
    rows = np.repeat(np.arange(n), np.diff(indptr))
    W[rows, indices] = weights
    A = W > 0
    out = np.full((starts.shape[0], length), -1, dtype=np.int64)
    cols = np.arange(n)
    for b0 in range(0, starts.shape[0], block):
        sl = slice(b0, b0 + block)
        cur = starts[sl].copy()
        prev = np.full_like(cur, -1)
        alive = np.ones(cur.shape[0], dtype=bool)
        out[sl, 0] = cur
        for s in range(1, length):
            scores = W[cur]
            second = prev >= 0
            if second.any():
                lam = np.where(A[np.maximum(prev, 0)], 1.0, inv_q)
                lam[cols[None, :] == prev[:, None]] = inv_p
                lam[~second] = 1.0
                scores = scores * lam
            cum = np.cumsum(scores, axis=1)
            total = cum[:, -1]
            alive &= total > 0
            if not alive.any():
                break
            target = uniforms[sl][:, s - 1] * total
            nxt = (cum <= target[:, None]).sum(axis=1)
            nxt = np.minimum(nxt, n - 1)
            prev = np.where(alive, cur, prev)
            cur = np.where(alive, nxt, cur)
            out[sl, s] = np.where(alive, cur, -1)
    return out


walk_kernel = pick(_walks_numba, _walks_numpy)


def walk_plan(csr: CSRGraph, config: WalkConfig):
    """Start nodes and pre-drawn uniforms; one generator per source node id."""
    starts = np.repeat(np.arange(csr.n, dtype=np.int64), config.walks_per_node)
    uniforms = np.empty((starts.shape[0], config.walk_length - 1))
    for i, nid in enumerate(csr.ids):
        rng = derive_rng(config.seed, "walk", nid)
        r0 = i * config.walks_per_node
        uniforms[r0:r0 + config.walks_per_node] = rng.random((config.walks_per_node, config.walk_length - 1))
    return starts, uniforms


def generate_walk_matrix(csr: CSRGraph, config: WalkConfig, kernel=None) -> np.ndarray:
    """Walks as a (n * walks_per_node, walk_length) index matrix padded with -1."""
    if csr.n == 0:
        raise ValueError("graph is empty")
    starts, uniforms = walk_plan(csr, config)
    kernel = kernel or walk_kernel
    return kernel(csr.indptr, csr.indices, csr.weights, starts, uniforms,
                  1.0 / config.p, 1.0 / config.q, config.walk_length)


def generate_walks(graph: NormalizedSubgraph, config: WalkConfig = WalkConfig()) -> list[list]:
    csr = to_csr(graph)
    mat = generate_walk_matrix(csr, config)
    return [[csr.ids[j] for j in row if j >= 0] for row in mat]
