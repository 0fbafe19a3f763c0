"""Exact t-SNE to two dimensions.

Bandwidths come from a per-point bisection on the Gaussian precision so the
conditional entropy hits log(perplexity); the map is optimized with early
exaggeration, momentum and per-coordinate gains.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .._accel import njit, pick
from ..seeding import derive_rng

EXAGGERATION = 12.0
EXAGGERATION_ITERS = 250
MOMENTUM_START = 0.5
MOMENTUM_END = 0.8
_P_FLOOR = 1e-12


@dataclass(frozen=True)
class TsneConfig:
    perplexity: float = 30.0
    iterations: int = 1000
    # None (or "auto"): max(n / exaggeration / 4, 50), see learning_rate_for
    learning_rate: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        lr = self.learning_rate
        if isinstance(lr, str):
            object.__setattr__(self, "learning_rate", None if lr == "auto" else float(lr))
        if self.perplexity < 2:
            raise ValueError("perplexity must be >= 2")
        if self.iterations < 250:
            raise ValueError("iterations must be >= 250")
        if self.learning_rate is not None and self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")

    def learning_rate_for(self, n: int) -> float:
        """Fixed 200 overshoots badly on slices of tens of points, so by default
        the step scales with n and bottoms out at 50."""
        if self.learning_rate is not None:
            return float(self.learning_rate)
        return max(n / EXAGGERATION / 4.0, 50.0)


def effective_perplexity(perplexity: float, n: int) -> float:
    """Small slices cannot support the requested perplexity; clamp to (n-1)/3 but never below 2.

    Below 2 the conditionals collapse onto the single nearest neighbour and tiny
    slices come out collinear.
    """
    return max(2.0, min(perplexity, (n - 1) / 3.0))


def squared_distances(X: np.ndarray) -> np.ndarray:
    sq = np.sum(X * X, axis=1)
    D = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(D, 0.0, out=D)
    np.fill_diagonal(D, 0.0)
    return D


@njit
def _calibrate_numba(D, log_perp, tol, max_iter):
    n = D.shape[0]
    P = np.zeros((n, n))
    betas = np.ones(n)
    row = np.empty(n)
    for i in range(n):
        dmin = np.inf
        for j in range(n):
            if j != i and D[i, j] < dmin:
                dmin = D[i, j]
        beta = 1.0
        used = beta
        s = 1.0
        lo = 0.0
        hi = np.inf
        for _ in range(max_iter):
            s = 0.0
            sd = 0.0
            for j in range(n):
                if j == i:
                    row[j] = 0.0
                else:
                    row[j] = np.exp(-(D[i, j] - dmin) * beta)
                    s += row[j]
                    sd += (D[i, j] - dmin) * row[j]
            H = np.log(s) + beta * sd / s
            used = beta
            diff = H - log_perp
            if abs(diff) < tol:
                break
            if diff > 0:
                lo = beta
                beta = beta * 2.0 if hi == np.inf else 0.5 * (beta + hi)
            else:
                hi = beta
                beta = 0.5 * (beta + lo)
        for j in range(n):
            P[i, j] = row[j] / s
        betas[i] = used
    return P, betas


def _calibrate_numpy(D, log_perp, tol, max_iter):
    n = D.shape[0]
    off = ~np.eye(n, dtype=bool)
    Dm = np.where(off, D, np.inf)
    Ds = np.where(off, D - Dm.min(axis=1, keepdims=True), 0.0)
    beta = np.ones(n)
    lo = np.zeros(n)
    hi = np.full(n, np.inf)
    done = np.zeros(n, dtype=bool)
    for _ in range(max_iter):
        E = np.where(off, np.exp(-Ds * beta[:, None]), 0.0)
        s = E.sum(axis=1)
        H = np.log(s) + beta * (Ds * E).sum(axis=1) / s
        diff = H - log_perp
        done |= np.abs(diff) < tol
        if done.all():
            break
        up = (diff > 0) & ~done
        down = (diff <= 0) & ~done
        lo = np.where(up, beta, lo)
        hi = np.where(down, beta, hi)
        nb = np.where(np.isinf(hi), beta * 2.0, 0.5 * (beta + hi))
        beta = np.where(up, nb, np.where(down, 0.5 * (beta + lo), beta))
    E = np.where(off, np.exp(-Ds * beta[:, None]), 0.0)
    return E / E.sum(axis=1, keepdims=True), beta


calibrate_kernel = pick(_calibrate_numba, _calibrate_numpy)


def conditional_probabilities(X: np.ndarray, perplexity: float, tol: float = 1e-10, max_iter: int = 200, kernel=None):
    """Row-stochastic P(j|i) with entropy log(perplexity) per row; returns (P, betas)."""
    kernel = kernel or calibrate_kernel
    D = squared_distances(np.asarray(X, dtype=np.float64))
    return kernel(D, float(np.log(perplexity)), tol, max_iter)


def entropy_bits(P_row: np.ndarray) -> float:
    p = P_row[P_row > 0]
    return float(-(p * np.log2(p)).sum())


@njit
def _gradient_numba(Y, P, grad):
    n = Y.shape[0]
    num = np.empty((n, n))
    total = 0.0
    for i in range(n):
        num[i, i] = 0.0
        for j in range(i + 1, n):
            dx = Y[i, 0] - Y[j, 0]
            dy = Y[i, 1] - Y[j, 1]
            v = 1.0 / (1.0 + dx * dx + dy * dy)
            num[i, j] = v
            num[j, i] = v
            total += 2.0 * v
    for i in range(n):
        gx = 0.0
        gy = 0.0
        for j in range(n):
            if j == i:
                continue
            q = max(num[i, j] / total, _P_FLOOR)
            m = (P[i, j] - q) * num[i, j]
            gx += m * (Y[i, 0] - Y[j, 0])
            gy += m * (Y[i, 1] - Y[j, 1])
        grad[i, 0] = 4.0 * gx
        grad[i, 1] = 4.0 * gy
    return num, total


def _gradient_numpy(Y, P, grad):
    diff = Y[:, None, :] - Y[None, :, :]
    num = 1.0 / (1.0 + np.sum(diff * diff, axis=2))
    np.fill_diagonal(num, 0.0)
    total = num.sum()
    Q = np.maximum(num / total, _P_FLOOR)
    np.fill_diagonal(Q, 0.0)
    M = (P - Q) * num
    grad[:] = 4.0 * np.einsum("ij,ijk->ik", M, diff)
    return num, total


gradient_kernel = pick(_gradient_numba, _gradient_numpy)


def kl_divergence(P: np.ndarray, num: np.ndarray, total: float) -> float:
    """KL(P || Q) where Q = num / total (diagonal ignored)."""
    Q = np.maximum(num / total, _P_FLOOR)
    mask = ~np.eye(P.shape[0], dtype=bool)
    p = P[mask]
    return float(np.sum(p * np.log(p / Q[mask])))


@njit
def _kl_numba(P, num, total):
    n = P.shape[0]
    kl = 0.0
    for i in range(n):
        for j in range(n):
            if i != j:
                q = max(num[i, j] / total, _P_FLOOR)
                kl += P[i, j] * np.log(P[i, j] / q)
    return kl


@njit
def _optimize_numba(P, Y, iterations, lr, exag_iters, exag, mom0, mom1):
    n = Y.shape[0]
    update = np.zeros_like(Y)
    gains = np.ones_like(Y)
    grad = np.empty_like(Y)
    Pe = P * exag
    trace = np.empty(iterations + 1)
    for it in range(iterations):
        if it < exag_iters:
            num, total = _gradient_numba(Y, Pe, grad)
            momentum = mom0
        else:
            num, total = _gradient_numba(Y, P, grad)
            momentum = mom1
        trace[it] = _kl_numba(P, num, total)
        for i in range(n):
            for d in range(2):
                if (grad[i, d] > 0) == (update[i, d] > 0):
                    gains[i, d] = max(gains[i, d] * 0.8, 0.01)
                else:
                    gains[i, d] = max(gains[i, d] + 0.2, 0.01)
                update[i, d] = momentum * update[i, d] - lr * gains[i, d] * grad[i, d]
                Y[i, d] += update[i, d]
        for d in range(2):
            m = 0.0
            for i in range(n):
                m += Y[i, d]
            m /= n
            for i in range(n):
                Y[i, d] -= m
    num, total = _gradient_numba(Y, P, grad)
    trace[iterations] = _kl_numba(P, num, total)
    return Y, trace


def _optimize_numpy(P, Y, iterations, lr, exag_iters, exag, mom0, mom1):
    update = np.zeros_like(Y)
    gains = np.ones_like(Y)
    grad = np.empty_like(Y)
    Pe = P * exag
    trace = np.empty(iterations + 1)
    for it in range(iterations):
        exaggerating = it < exag_iters
        num, total = _gradient_numpy(Y, Pe if exaggerating else P, grad)
        trace[it] = kl_divergence(P, num, total)
        momentum = mom0 if exaggerating else mom1
        same_sign = (grad > 0) == (update > 0)
        gains = np.maximum(np.where(same_sign, gains * 0.8, gains + 0.2), 0.01)
        update = momentum * update - lr * gains * grad
        Y = Y + update
        Y = Y - Y.mean(axis=0)
    num, total = _gradient_numpy(Y, P, grad)
    trace[iterations] = kl_divergence(P, num, total)
    return Y, trace


optimize_kernel = pick(_optimize_numba, _optimize_numpy)


@dataclass
class TsneResult:
    coords: np.ndarray
    kl_trace: list = field(default_factory=list)  # KL(P||Q) with un-exaggerated P, per iteration
    betas: np.ndarray | None = None
    perplexity: float = 0.0


def fallback_line(n: int) -> np.ndarray:
    """Coordinates used when there are too few points for t-SNE."""
    return np.column_stack([np.arange(n, dtype=np.float64), np.zeros(n)])


def joint_probabilities(X: np.ndarray, perplexity: float, calib_kernel=None):
    n = X.shape[0]
    Pc, betas = conditional_probabilities(X, perplexity, kernel=calib_kernel)
    P = (Pc + Pc.T) / (2.0 * n)
    P = np.maximum(P, _P_FLOOR)
    np.fill_diagonal(P, 0.0)
    return P, betas


def fit_tsne(X: np.ndarray, config: TsneConfig = TsneConfig(), kernel=None, calib_kernel=None) -> TsneResult:
    """Embed rows of X in 2-D; fewer than three rows fall back to a line."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n < 3:
        return TsneResult(fallback_line(n))
    kernel = kernel or optimize_kernel
    perp = effective_perplexity(config.perplexity, n)
    P, betas = joint_probabilities(X, perp, calib_kernel)
    Y0 = derive_rng(config.seed, "tsne").normal(0.0, 1e-4, size=(n, 2))
    Y, trace = kernel(P, Y0, config.iterations, config.learning_rate_for(n), min(EXAGGERATION_ITERS, config.iterations),
                      EXAGGERATION, MOMENTUM_START, MOMENTUM_END)
    return TsneResult(Y, list(trace), betas, perp)


def tsne_2d(embeddings: dict, config: TsneConfig = TsneConfig()) -> dict:
    """id -> (x, y). Fewer than three points are laid out on a line."""
    ids = list(embeddings)
    if not ids:
        return {}
    X = np.vstack([np.asarray(embeddings[i], dtype=np.float64) for i in ids])
    res = fit_tsne(X, config)
    return {nid: (float(res.coords[k, 0]), float(res.coords[k, 1])) for k, nid in enumerate(ids)}
