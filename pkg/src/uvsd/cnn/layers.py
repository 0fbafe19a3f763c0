"""3-D convolution ('same' zero padding, stride 1) and 2x2x2 ceil-mode max
pooling over channels-last tensors (B, D, H, W, C), forward and backward."""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .._accel import njit, pick


@njit
def _conv3d_fwd_numba(x, w, b):
    B, D, H, W, C = x.shape
    k = w.shape[0]
    F = w.shape[4]
    pad = k // 2
    y = np.empty((B, D, H, W, F))
    for n in range(B):
        for d in range(D):
            for h in range(H):
                for ww in range(W):
                    for f in range(F):
                        y[n, d, h, ww, f] = b[f]
                    for i in range(k):
                        zd = d + i - pad
                        if zd < 0 or zd >= D:
                            continue
                        for j in range(k):
                            zh = h + j - pad
                            if zh < 0 or zh >= H:
                                continue
                            for l in range(k):
                                zw = ww + l - pad
                                if zw < 0 or zw >= W:
                                    continue
                                for c in range(C):
                                    xv = x[n, zd, zh, zw, c]
                                    for f in range(F):
                                        y[n, d, h, ww, f] += xv * w[i, j, l, c, f]
    return y


@njit
def _conv3d_bwd_numba(x, w, dy):
    B, D, H, W, C = x.shape
    k = w.shape[0]
    F = w.shape[4]
    pad = k // 2
    dx = np.zeros_like(x)
    dw = np.zeros_like(w)
    db = np.zeros(F)
    for n in range(B):
        for d in range(D):
            for h in range(H):
                for ww in range(W):
                    for f in range(F):
                        db[f] += dy[n, d, h, ww, f]
                    for i in range(k):
                        zd = d + i - pad
                        if zd < 0 or zd >= D:
                            continue
                        for j in range(k):
                            zh = h + j - pad
                            if zh < 0 or zh >= H:
                                continue
                            for l in range(k):
                                zw = ww + l - pad
                                if zw < 0 or zw >= W:
                                    continue
                                for c in range(C):
                                    xv = x[n, zd, zh, zw, c]
                                    acc = 0.0
                                    for f in range(F):
                                        g = dy[n, d, h, ww, f]
                                        dw[i, j, l, c, f] += xv * g
                                        acc += w[i, j, l, c, f] * g
                                    dx[n, zd, zh, zw, c] += acc
    return dx, dw, db


def _pad_spatial(x, pad):
    return np.pad(x, ((0, 0), (pad, pad), (pad, pad), (pad, pad), (0, 0)))


def _conv3d_fwd_numpy(x, w, b):
    k = w.shape[0]
    wt = w.transpose(3, 0, 1, 2, 4)  # (C, k, k, k, F)
    out = np.empty(x.shape[:4] + (w.shape[4],))
    for n in range(x.shape[0]):
        win = sliding_window_view(_pad_spatial(x[n:n + 1], k // 2)[0], (k, k, k), axis=(0, 1, 2))
        out[n] = np.tensordot(win, wt, axes=([3, 4, 5, 6], [0, 1, 2, 3])) + b
    return out


def _conv3d_bwd_numpy(x, w, dy):
    k = w.shape[0]
    pad = k // 2
    dw = np.zeros((w.shape[3], k, k, k, w.shape[4]))
    dx = np.empty_like(x)
    wf = w[::-1, ::-1, ::-1].transpose(4, 0, 1, 2, 3)  # (F, k, k, k, C)
    for n in range(x.shape[0]):
        win = sliding_window_view(_pad_spatial(x[n:n + 1], pad)[0], (k, k, k), axis=(0, 1, 2))
        dw += np.tensordot(win, dy[n], axes=([0, 1, 2], [0, 1, 2]))
        dwin = sliding_window_view(_pad_spatial(dy[n:n + 1], pad)[0], (k, k, k), axis=(0, 1, 2))
        dx[n] = np.tensordot(dwin, wf, axes=([3, 4, 5, 6], [0, 1, 2, 3]))
    db = dy.sum(axis=(0, 1, 2, 3))
    return dx, dw.transpose(1, 2, 3, 0, 4), db


@njit
def _pool_fwd_numba(x):
    B, D, H, W, C = x.shape
    D2, H2, W2 = (D + 1) // 2, (H + 1) // 2, (W + 1) // 2
    y = np.empty((B, D2, H2, W2, C))
    arg = np.zeros((B, D2, H2, W2, C), dtype=np.int64)
    for n in range(B):
        for d in range(D2):
            for h in range(H2):
                for ww in range(W2):
                    for c in range(C):
                        best = -np.inf
                        bi = 0
                        for t in range(8):
                            zd = 2 * d + (t >> 2)
                            zh = 2 * h + ((t >> 1) & 1)
                            zw = 2 * ww + (t & 1)
                            if zd < D and zh < H and zw < W:
                                v = x[n, zd, zh, zw, c]
                                if v > best:
                                    best = v
                                    bi = t
                        y[n, d, h, ww, c] = best
                        arg[n, d, h, ww, c] = bi
    return y, arg


@njit
def _pool_bwd_numba(dy, arg, x_shape):
    dx = np.zeros(x_shape)
    B, D2, H2, W2, C = dy.shape
    for n in range(B):
        for d in range(D2):
            for h in range(H2):
                for ww in range(W2):
                    for c in range(C):
                        t = arg[n, d, h, ww, c]
                        dx[n, 2 * d + (t >> 2), 2 * h + ((t >> 1) & 1), 2 * ww + (t & 1), c] += dy[n, d, h, ww, c]
    return dx


def _blocks(x, fill):
    B, D, H, W, C = x.shape
    xp = np.pad(x, ((0, 0), (0, D % 2), (0, H % 2), (0, W % 2), (0, 0)), constant_values=fill)
    D2, H2, W2 = xp.shape[1] // 2, xp.shape[2] // 2, xp.shape[3] // 2
    blk = xp.reshape(B, D2, 2, H2, 2, W2, 2, C).transpose(0, 1, 3, 5, 7, 2, 4, 6)
    return blk.reshape(B, D2, H2, W2, C, 8)


def _pool_fwd_numpy(x):
    blk = _blocks(x, -np.inf)
    arg = blk.argmax(axis=-1)
    return np.take_along_axis(blk, arg[..., None], axis=-1)[..., 0], arg


def _pool_bwd_numpy(dy, arg, x_shape):
    B, D, H, W, C = x_shape
    D2, H2, W2 = dy.shape[1:4]
    blk = np.zeros(dy.shape + (8,))
    np.put_along_axis(blk, arg[..., None], dy[..., None], axis=-1)
    full = blk.reshape(B, D2, H2, W2, C, 2, 2, 2).transpose(0, 1, 5, 2, 6, 3, 7, 4)
    full = full.reshape(B, 2 * D2, 2 * H2, 2 * W2, C)
    return np.ascontiguousarray(full[:, :D, :H, :W, :])


conv3d_forward = pick(_conv3d_fwd_numba, _conv3d_fwd_numpy)
conv3d_backward = pick(_conv3d_bwd_numba, _conv3d_bwd_numpy)
maxpool_forward = pick(_pool_fwd_numba, _pool_fwd_numpy)


def maxpool_backward(dy, arg, x_shape):
    impl = pick(_pool_bwd_numba, _pool_bwd_numpy)
    return impl(dy, arg, tuple(int(s) for s in x_shape))


def pooled_size(n: int) -> int:
    return (n + 1) // 2


# direct access to both paths for cross-checks and benchmarks
KERNELS = {
    "numba": (_conv3d_fwd_numba, _conv3d_bwd_numba, _pool_fwd_numba, _pool_bwd_numba),
    "numpy": (_conv3d_fwd_numpy, _conv3d_bwd_numpy, _pool_fwd_numpy, _pool_bwd_numpy),
}
