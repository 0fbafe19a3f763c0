"""Adam, the early-stopping training loop, prediction and checkpoints."""
from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from ..seeding import derive_rng
from .model import PARAM_ORDER, ArchConfig, ModelParams, bce, forward, forward_batch, init_params, loss_and_gradients

log = logging.getLogger(__name__)

CKPT_MAGIC = b"UVSM"
CKPT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    epochs: int = 100
    batch_size: int = 16
    patience: int = 10
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.learning_rate <= 0 or self.epochs < 0 or self.batch_size < 1 or self.patience < 1:
            raise ValueError("invalid training hyperparameters")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1) or self.eps <= 0:
            raise ValueError("Adam needs 0 < beta1, beta2 < 1 and eps > 0")


@dataclass
class OptimizerState:
    m: ModelParams
    v: ModelParams
    step: int = 0

    @classmethod
    def zeros(cls, params: ModelParams) -> "OptimizerState":
        return cls(params.zeros_like(), params.zeros_like(), 0)


def adam_step(params: ModelParams, grads: ModelParams, state: OptimizerState, config: TrainConfig = TrainConfig()):
    """One bias-corrected Adam update; returns fresh (params, state)."""
    t = state.step + 1
    b1, b2 = config.beta1, config.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    new_p, new_m, new_v = ModelParams(), ModelParams(), ModelParams()
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} does not match {name} {p.shape}")
        m = b1 * state.m[name] + (1.0 - b1) * g
        v = b2 * state.v[name] + (1.0 - b2) * (g * g)
        new_p[name] = p - config.learning_rate * (m / c1) / (np.sqrt(v / c2) + config.eps)
        new_m[name], new_v[name] = m, v
    return new_p, OptimizerState(new_m, new_v, t)


def _stack(items):
    frames = np.stack([np.asarray(v.frames if hasattr(v, "frames") else v) for v, _ in items])
    labels = np.array([int(y) for _, y in items], dtype=np.float64)
    return frames, labels


def predict_scores(params: ModelParams, videos, batch_size: int = 32) -> np.ndarray:
    out = []
    for i in range(0, len(videos), batch_size):
        chunk = videos[i:i + batch_size]
        out.append(forward_batch(np.stack([np.asarray(getattr(v, "frames", v)) for v in chunk]), params))
    return np.concatenate(out) if out else np.empty(0)


def dataset_loss(params: ModelParams, items, batch_size: int = 32) -> float:
    """Mean clamped BCE over a labelled set."""
    videos = [v for v, _ in items]
    labels = np.array([y for _, y in items], dtype=np.float64)
    return bce(predict_scores(params, videos, batch_size), labels)


def predict(params: ModelParams, video):
    """(score, label); label is 1 when score >= 0.5."""
    score = forward(video, params)
    return score, int(score >= 0.5)


@dataclass
class TrainResult:
    params: ModelParams
    best_epoch: int = 0
    epochs_run: int = 0
    train_losses: list = field(default_factory=list)
    val_losses: list = field(default_factory=list)


def fit(train_set, val_set, config: TrainConfig = TrainConfig(), arch: ArchConfig = ArchConfig(),
        init: Optional[ModelParams] = None,
        evaluate: Optional[Callable[[ModelParams, int], float]] = None) -> TrainResult:
    """Mini-batch Adam with early stopping on validation loss.

    ``evaluate(params, epoch)`` replaces the default validation loss; the
    parameters with the lowest validation loss are returned.
    """
    if not train_set or not val_set:
        raise ValueError("train and validation sets must be non-empty")
    X, y = _stack(train_set)
    params = init if init is not None else init_params(X.shape[1:], arch, config.seed)
    params = params.copy()
    if evaluate is None:
        evaluate = lambda p, epoch: dataset_loss(p, val_set, max(config.batch_size, 32))  # noqa: E731
    state = OptimizerState.zeros(params)
    result = TrainResult(params.copy())
    best = math.inf
    wait = 0
    for epoch in range(1, config.epochs + 1):
        order = derive_rng(config.seed, "shuffle", epoch).permutation(X.shape[0])
        total = 0.0
        for i in range(0, order.shape[0], config.batch_size):
            idx = order[i:i + config.batch_size]
            loss, grads = loss_and_gradients(X[idx], y[idx], params)
            params, state = adam_step(params, grads, state, config)
            total += loss * idx.shape[0]
        result.train_losses.append(total / X.shape[0])
        val = float(evaluate(params, epoch))
        result.val_losses.append(val)
        result.epochs_run = epoch
        log.debug("epoch %d train %.4f val %.4f", epoch, result.train_losses[-1], val)
        if val < best:
            best, wait = val, 0
            result.params, result.best_epoch = params.copy(), epoch
        else:
            wait += 1
            if wait >= config.patience:
                log.info("early stop at epoch %d (best %d)", epoch, result.best_epoch)
                break
    return result


def train(train_set, val_set, config: TrainConfig = TrainConfig(), arch: ArchConfig = ArchConfig(), **kw) -> ModelParams:
    return fit(train_set, val_set, config, arch, **kw).params


# ---------------------------------------------------------------------------
# checkpoint file


def write_checkpoint(params: ModelParams, path) -> None:
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC + struct.pack("<I", CKPT_VERSION))
        for name, arr in params.items():
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)) + raw)
            fh.write(struct.pack("<I", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_checkpoint(path) -> ModelParams:
    raw = Path(path).read_bytes()
    if raw[:4] != CKPT_MAGIC:
        raise ValueError(f"{path}: not a model checkpoint")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != CKPT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    pos = 8
    params = ModelParams()
    try:
        while pos < len(raw):
            (n,) = struct.unpack_from("<I", raw, pos)
            name = raw[pos + 4:pos + 4 + n].decode("utf-8")
            pos += 4 + n
            (rank,) = struct.unpack_from("<I", raw, pos)
            dims = struct.unpack_from(f"<{rank}I", raw, pos + 4)
            pos += 4 + 4 * rank
            count = int(np.prod(dims)) if rank else 1
            params[name] = np.frombuffer(raw, dtype="<f8", count=count, offset=pos).reshape(dims).astype(np.float64)
            pos += 8 * count
    except (struct.error, ValueError) as exc:
        raise ValueError(f"{path}: truncated or corrupt checkpoint") from exc
    missing = [k for k in PARAM_ORDER if k not in params]
    if missing:
        raise ValueError(f"{path}: missing tensors {missing}")
    return ModelParams((k, params[k]) for k in PARAM_ORDER)
