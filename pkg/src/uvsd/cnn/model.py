"""Two conv3d blocks + two dense layers with hand-written backprop."""
from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from ..seeding import derive_rng
from . import layers

PROB_CLAMP = 1e-7
PARAM_ORDER = ("conv1.w", "conv1.b", "conv2.w", "conv2.b", "fc1.w", "fc1.b", "fc2.w", "fc2.b")


@dataclass(frozen=True)
class ArchConfig:
    conv_channels: tuple = (8, 16)
    hidden: int = 64
    kernel: int = 3

    def __post_init__(self):
        if len(self.conv_channels) != 2 or min(self.conv_channels) < 1:
            raise ValueError("exactly two positive conv channel counts required")
        if self.hidden < 1 or self.kernel < 1 or self.kernel % 2 == 0:
            raise ValueError("hidden must be >= 1 and kernel a positive odd number")


class ModelParams(OrderedDict):
    """Named parameter tensors in a fixed order."""

    def copy(self) -> "ModelParams":
        return ModelParams((k, v.copy()) for k, v in self.items())

    @property
    def input_channels(self) -> int:
        return self["conv1.w"].shape[3]

    def zeros_like(self) -> "ModelParams":
        return ModelParams((k, np.zeros_like(v)) for k, v in self.items())


def flat_size(input_shape, conv_channels) -> int:
    d, h, w, _ = input_shape
    for _ in range(2):
        d, h, w = layers.pooled_size(d), layers.pooled_size(h), layers.pooled_size(w)
    return d * h * w * conv_channels[1]


def init_params(input_shape, arch: ArchConfig = ArchConfig(), seed: int = 0) -> ModelParams:
    """He-uniform weights (one seeded stream per tensor), zero biases."""
    k = arch.kernel
    c_in = input_shape[3]
    c1, c2 = arch.conv_channels
    shapes = {
        "conv1.w": (k, k, k, c_in, c1),
        "conv2.w": (k, k, k, c1, c2),
        "fc1.w": (flat_size(input_shape, arch.conv_channels), arch.hidden),
        "fc2.w": (arch.hidden, 1),
    }
    params = ModelParams()
    for name in PARAM_ORDER:
        if name.endswith(".b"):
            params[name] = np.zeros(shapes[name[:-2] + ".w"][-1])
            continue
        shape = shapes[name]
        fan_in = int(np.prod(shape[:-1]))
        limit = math.sqrt(6.0 / fan_in)
        params[name] = derive_rng(seed, "init", name).uniform(-limit, limit, size=shape)
    return params


def _check(name, idx, arr):
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"non-finite values at layer {idx} ({name})")


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _as_batch(videos, params: ModelParams) -> np.ndarray:
    x = np.asarray(videos, dtype=np.float64)
    if x.ndim == 4:
        x = x[None]
    if x.ndim != 5:
        raise ValueError(f"expected (B, n, H, W, C) input, got shape {x.shape}")
    if x.shape[4] != params.input_channels:
        raise ValueError(f"expected {params.input_channels} channels, got {x.shape[4]}")
    flat = flat_size(x.shape[1:], (0, params["conv2.w"].shape[4]))
    if flat != params["fc1.w"].shape[0]:
        raise ValueError(f"input shape {x.shape[1:]} does not match the model (flatten {flat} vs {params['fc1.w'].shape[0]})")
    return x


def forward_batch(videos, params: ModelParams, keep_cache: bool = False):
    """Probabilities for a batch (B, n, H, W, C); optionally the backprop cache."""
    x = _as_batch(videos, params)
    z1 = layers.conv3d_forward(x, params["conv1.w"], params["conv1.b"])
    _check("conv1", 0, z1)
    a1 = np.maximum(z1, 0.0)
    p1, arg1 = layers.maxpool_forward(a1)
    z2 = layers.conv3d_forward(p1, params["conv2.w"], params["conv2.b"])
    _check("conv2", 1, z2)
    a2 = np.maximum(z2, 0.0)
    p2, arg2 = layers.maxpool_forward(a2)
    f = p2.reshape(p2.shape[0], -1)
    h = f @ params["fc1.w"] + params["fc1.b"]
    _check("fc1", 2, h)
    a3 = np.maximum(h, 0.0)
    logit = (a3 @ params["fc2.w"] + params["fc2.b"])[:, 0]
    _check("fc2", 3, logit)
    prob = _sigmoid(logit)
    if not keep_cache:
        return prob
    cache = dict(x=x, z1=z1, a1=a1, p1=p1, arg1=arg1, z2=z2, a2=a2, p2=p2, arg2=arg2, f=f, h=h, a3=a3, logit=logit)
    return prob, cache


def forward(video, params: ModelParams) -> float:
    """Spammer probability for one (n, H, W, C) video."""
    frames = video.frames if hasattr(video, "frames") else video
    return float(forward_batch(np.asarray(frames)[None], params)[0])


def bce(prob: np.ndarray, labels: np.ndarray) -> float:
    p = np.clip(prob, PROB_CLAMP, 1.0 - PROB_CLAMP)
    y = np.asarray(labels, dtype=np.float64)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def loss_and_gradients(videos, labels, params: ModelParams):
    """Mean clamped binary cross-entropy and exact gradients for every tensor."""
    y = np.asarray(labels, dtype=np.float64)
    prob, c = forward_batch(videos, params, keep_cache=True)
    if prob.shape[0] == 0:
        raise ValueError("empty batch")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    B = prob.shape[0]
    loss = bce(prob, y)
    inside = (prob > PROB_CLAMP) & (prob < 1.0 - PROB_CLAMP)
    dlogit = np.where(inside, (prob - y) / B, 0.0)

    g = ModelParams()
    g["fc2.w"] = c["a3"].T @ dlogit[:, None]
    g["fc2.b"] = np.array([dlogit.sum()])
    da3 = dlogit[:, None] @ params["fc2.w"].T
    dh = da3 * (c["h"] > 0)
    g["fc1.w"] = c["f"].T @ dh
    g["fc1.b"] = dh.sum(axis=0)
    dp2 = (dh @ params["fc1.w"].T).reshape(c["p2"].shape)
    da2 = layers.maxpool_backward(dp2, c["arg2"], c["a2"].shape)
    dz2 = da2 * (c["z2"] > 0)
    dp1, g["conv2.w"], g["conv2.b"] = layers.conv3d_backward(c["p1"], params["conv2.w"], dz2)
    da1 = layers.maxpool_backward(dp1, c["arg1"], c["a1"].shape)
    dz1 = da1 * (c["z1"] > 0)
    _, g["conv1.w"], g["conv1.b"] = layers.conv3d_backward(c["x"], params["conv1.w"], dz1)
    for k, name in enumerate(PARAM_ORDER):
        _check(f"grad {name}", k, g[name])
    return loss, ModelParams((k, g[k]) for k in PARAM_ORDER)
