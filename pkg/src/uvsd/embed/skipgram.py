"""Skip-gram with negative sampling over random-walk corpora."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .._accel import njit, pick
from ..seeding import derive_rng


@dataclass(frozen=True)
class EmbeddingConfig:
    dim: int = 64
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    seed: int = 0

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        if self.window < 1 or self.negatives < 1:
            raise ValueError("window and negatives must be >= 1")
        if self.epochs < 0 or self.learning_rate <= 0:
            raise ValueError("epochs must be >= 0 and learning_rate > 0")


def _log_sigmoid(x: float) -> float:
    if x >= 0:
        return -math.log1p(math.exp(-x))
    return x - math.log1p(math.exp(x))


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def pair_loss_and_grad(v, u_pos, u_negs):
    """Negative-sampling loss of one (center, context) pair and its gradients.

    loss = -log s(u_pos.v) - sum_k log s(-u_k.v)
    Returns (loss, d/dv, d/du_pos, d/du_negs).
    """
    v = np.asarray(v, dtype=np.float64)
    u_pos = np.asarray(u_pos, dtype=np.float64)
    u_negs = np.atleast_2d(np.asarray(u_negs, dtype=np.float64))
    sp = float(u_pos @ v)
    loss = -_log_sigmoid(sp)
    gp = _sigmoid(sp) - 1.0
    dv = gp * u_pos
    du_pos = gp * v
    du_negs = np.empty_like(u_negs)
    for k in range(u_negs.shape[0]):
        sn = float(u_negs[k] @ v)
        loss -= _log_sigmoid(-sn)
        gn = _sigmoid(sn)
        dv = dv + gn * u_negs[k]
        du_negs[k] = gn * v
    return loss, dv, du_pos, du_negs


@njit
def _logsig_nb(x):
    if x >= 0:
        return -np.log1p(np.exp(-x))
    return x - np.log1p(np.exp(x))


@njit
def _sig_nb(x):
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    z = np.exp(x)
    return z / (1.0 + z)


@njit
def _sgns_epoch_numba(w_in, w_out, centers, contexts, negs, lr0, step0, total_steps):
    dim = w_in.shape[1]
    k_neg = negs.shape[1]
    grad_v = np.empty(dim)
    loss = 0.0
    for i in range(centers.shape[0]):
        lr = lr0 * max(1e-4, 1.0 - (step0 + i) / total_steps)
        c = centers[i]
        for d in range(dim):
            grad_v[d] = 0.0
        for k in range(k_neg + 1):
            if k == 0:
                t = contexts[i]
                label = 1.0
            else:
                t = negs[i, k - 1]
                label = 0.0
            s = 0.0
            for d in range(dim):
                s += w_out[t, d] * w_in[c, d]
            if k == 0:
                loss -= _logsig_nb(s)
            else:
                loss -= _logsig_nb(-s)
            g = _sig_nb(s) - label
            for d in range(dim):
                grad_v[d] += g * w_out[t, d]
                w_out[t, d] -= lr * g * w_in[c, d]
        for d in range(dim):
            w_in[c, d] -= lr * grad_v[d]
    return loss


def _sgns_epoch_numpy(w_in, w_out, centers, contexts, negs, lr0, step0, total_steps):
    loss = 0.0
    for i in range(centers.shape[0]):
        lr = lr0 * max(1e-4, 1.0 - (step0 + i) / total_steps)
        c = centers[i]
        v = w_in[c].copy()
        grad_v = np.zeros_like(v)
        targets = (contexts[i],) + tuple(negs[i])
        for k, t in enumerate(targets):
            s = float(w_out[t] @ v)
            loss -= _log_sigmoid(s) if k == 0 else _log_sigmoid(-s)
            g = _sigmoid(s) - (1.0 if k == 0 else 0.0)
            grad_v += g * w_out[t]
            w_out[t] -= lr * g * v
        w_in[c] -= lr * grad_v
    return loss


sgns_epoch_kernel = pick(_sgns_epoch_numba, _sgns_epoch_numpy)


def context_pairs(walks: np.ndarray, window: int):
    """(center, context) index pairs from a -1 padded walk matrix.

    Ordered walk by walk, then by center position, then by context position.
    """
    walks = np.asarray(walks, dtype=np.int64)
    if walks.size == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    L = walks.shape[1]
    offsets = np.array([o for o in range(-window, window + 1) if o != 0])
    pos = np.arange(L)
    ctx_pos = pos[:, None] + offsets[None, :]  # (L, 2w)
    in_range = (ctx_pos >= 0) & (ctx_pos < L)
    ctx = walks[:, np.clip(ctx_pos, 0, L - 1)]  # (n_walks, L, 2w)
    cen = np.broadcast_to(walks[:, :, None], ctx.shape)
    valid = in_range[None] & (ctx >= 0) & (cen >= 0)
    return cen[valid].copy(), ctx[valid].copy()


def noise_distribution(walks: np.ndarray, n: int, power: float = 0.75) -> np.ndarray:
    counts = np.bincount(walks[walks >= 0], minlength=n).astype(np.float64)
    probs = counts ** power
    return probs / probs.sum()


@dataclass
class SkipGramFit:
    vectors: np.ndarray  # input-side embeddings, one row per node index
    context_vectors: np.ndarray
    losses: list  # mean pair loss per epoch


def fit_skipgram(walks: np.ndarray, n: int, config: EmbeddingConfig = EmbeddingConfig(), kernel=None) -> SkipGramFit:
    """Train on an index walk matrix covering nodes 0..n-1."""
    kernel = kernel or sgns_epoch_kernel
    rng = derive_rng(config.seed, "skipgram")
    w_in = (rng.random((n, config.dim)) - 0.5) / config.dim
    w_out = np.zeros((n, config.dim))
    centers, contexts = context_pairs(walks, config.window)
    losses = []
    if centers.shape[0] == 0 or config.epochs == 0:
        return SkipGramFit(w_in, w_out, losses)
    cdf = np.cumsum(noise_distribution(walks, n))
    cdf[-1] = 1.0
    total = centers.shape[0] * config.epochs
    for epoch in range(config.epochs):
        negs = np.searchsorted(cdf, rng.random((centers.shape[0], config.negatives)), side="right").astype(np.int64)
        loss = kernel(w_in, w_out, centers, contexts, negs, config.learning_rate,
                      epoch * centers.shape[0], total)
        losses.append(loss / centers.shape[0])
    return SkipGramFit(w_in, w_out, losses)


def train_skipgram(walks: list, config: EmbeddingConfig = EmbeddingConfig(), nodes=None) -> dict:
    """Embed node ids appearing in ``walks``; returns id -> vector.

    When ``nodes`` is given every one of them must appear in some walk.
    """
    vocab = {}
    for walk in walks:
        for nid in walk:
            if nid not in vocab:
                vocab[nid] = len(vocab)
    if nodes is not None:
        missing = [nid for nid in nodes if nid not in vocab]
        if missing:
            raise ValueError(f"node {missing[0]!r} is absent from all walks")
        # keep caller order for the index space
        vocab = {nid: i for i, nid in enumerate(nodes)}
    length = max((len(w) for w in walks), default=0)
    mat = np.full((len(walks), length), -1, dtype=np.int64)
    for r, walk in enumerate(walks):
        mat[r, :len(walk)] = [vocab[nid] for nid in walk]
    fit = fit_skipgram(mat, len(vocab), config)
    return {nid: fit.vectors[i] for nid, i in vocab.items()}
