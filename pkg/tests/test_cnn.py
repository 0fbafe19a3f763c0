import math

import numpy as np
import pytest

from checks import SMALL_ARCH, SMALL_SHAPE, cnn_gradient_errors, layer_gradient_errors
from oracles import conv3d_naive, maxpool_naive
from uvsd.cnn import (
    ArchConfig, OptimizerState, TrainConfig, adam_step, fit, forward, forward_batch, init_params,
    loss_and_gradients, predict, read_checkpoint, train, write_checkpoint,
)
from uvsd.cnn import layers
from uvsd.cnn.model import PARAM_ORDER, PROB_CLAMP, bce
from uvsd.cnn.training import dataset_loss


def toy_set(n, shape=(4, 8, 8, 3), seed=0, separable=False):
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2
    if separable:
        X = rng.uniform(0, 0.2, size=(n,) + shape)
        X[y == 1, ..., 0] += 0.5
    else:
        X = rng.uniform(0, 1, size=(n,) + shape)
    return list(zip(X, y.tolist()))


# --- layers ------------------------------------------------------------------

@pytest.mark.parametrize("backend", ["numba", "numpy"])
def test_conv_matches_naive_loops(backend):
    fwd = layers.KERNELS[backend][0]
    rng = np.random.default_rng(1)
    for shape in [(1, 3, 4, 5, 2), (2, 1, 1, 1, 3), (1, 2, 6, 3, 1)]:
        x = rng.normal(size=shape)
        w = rng.normal(size=(3, 3, 3, shape[4], 4))
        b = rng.normal(size=4)
        np.testing.assert_allclose(fwd(x, w, b), conv3d_naive(x, w, b), rtol=0, atol=1e-10)


@pytest.mark.parametrize("backend", ["numba", "numpy"])
def test_pool_matches_window_maximum(backend):
    fwd = layers.KERNELS[backend][2]
    rng = np.random.default_rng(2)
    for shape in [(1, 4, 4, 4, 2), (2, 3, 5, 1, 3), (1, 1, 1, 1, 1)]:
        x = rng.normal(size=shape)
        y, _ = fwd(x)
        assert y.shape == tuple([shape[0]] + [-(-s // 2) for s in shape[1:4]] + [shape[4]])
        np.testing.assert_array_equal(y, maxpool_naive(x))


def test_backends_agree():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(2, 3, 5, 4, 2))
    w = rng.normal(size=(3, 3, 3, 2, 3))
    b = rng.normal(size=3)
    dy = rng.normal(size=(2, 3, 5, 4, 3))
    a, n = layers.KERNELS["numba"], layers.KERNELS["numpy"]
    np.testing.assert_allclose(a[0](x, w, b), n[0](x, w, b), atol=1e-12)
    for u, v in zip(a[1](x, w, dy), n[1](x, w, dy)):
        np.testing.assert_allclose(u, v, atol=1e-12)
    (ya, arga), (yb, argb) = a[2](x), n[2](x)
    np.testing.assert_array_equal(ya, yb)
    dp = rng.normal(size=ya.shape)
    np.testing.assert_array_equal(a[3](dp, arga, x.shape), n[3](dp, argb, x.shape))


@pytest.mark.parametrize("backend", ["numba", "numpy"])
def test_layer_gradients(backend):
    errs = layer_gradient_errors(seed=4, kernels=layers.KERNELS[backend])
    assert max(errs.values()) < 1e-4, errs


def test_model_gradients_match_finite_differences():
    errs = cnn_gradient_errors(seed=0)
    assert set(errs) == set(PARAM_ORDER)
    assert max(errs.values()) < 1e-4, errs


# --- forward and loss ----------------------------------------------------------

def test_zero_params_give_half():
    params = init_params(SMALL_SHAPE, SMALL_ARCH).zeros_like()
    x = np.random.default_rng(0).uniform(size=SMALL_SHAPE)
    assert forward(x, params) == 0.5
    loss, _ = loss_and_gradients(np.stack([x, x]), [0, 1], params)
    assert loss == pytest.approx(math.log(2), abs=1e-12)


def test_output_range_and_determinism():
    params = init_params(SMALL_SHAPE, SMALL_ARCH, seed=3)
    rng = np.random.default_rng(1)
    for _ in range(5):
        x = rng.normal(0, 3, size=SMALL_SHAPE)
        p = forward(x, params)
        assert 0.0 < p < 1.0
        assert forward(x.copy(), params) == p


def test_clamped_loss_floor():
    floor = -math.log(1 - PROB_CLAMP)
    assert bce(np.array([1.0, 0.0]), np.array([1, 0])) <= floor + 1e-15
    assert bce(np.array([0.0]), np.array([1])) == pytest.approx(-math.log(PROB_CLAMP))
    params = init_params(SMALL_SHAPE, SMALL_ARCH).zeros_like()
    params["fc2.b"][:] = 50.0
    loss, grads = loss_and_gradients(np.zeros((1,) + SMALL_SHAPE), [1], params)
    assert loss <= floor + 1e-15
    assert not grads["fc2.b"].any()


def test_shape_and_label_errors():
    params = init_params(SMALL_SHAPE, SMALL_ARCH)
    with pytest.raises(ValueError):
        forward(np.zeros((2, 8, 8, 4)), params)
    with pytest.raises(ValueError):
        forward(np.zeros((2, 16, 16, 3)), params)
    with pytest.raises(ValueError):
        loss_and_gradients(np.zeros((1,) + SMALL_SHAPE), [2], params)


def test_non_finite_reports_layer():
    params = init_params(SMALL_SHAPE, SMALL_ARCH)
    x = np.zeros(SMALL_SHAPE)
    x[0, 0, 0, 0] = np.nan
    with pytest.raises(FloatingPointError, match="layer 0"):
        forward(x, params)


def test_init_is_seeded_he_uniform():
    a = init_params((4, 16, 16, 3), ArchConfig(), seed=5)
    b = init_params((4, 16, 16, 3), ArchConfig(), seed=5)
    assert list(a) == list(PARAM_ORDER)
    for k in a:
        assert np.array_equal(a[k], b[k])
    limit = math.sqrt(6 / (27 * 3))
    assert np.abs(a["conv1.w"]).max() <= limit
    assert not a["conv1.b"].any()
    assert a["fc1.w"].shape == (1 * 4 * 4 * 16, 64)


# --- Adam ----------------------------------------------------------------------

def test_adam_zero_gradient_is_identity():
    params = init_params(SMALL_SHAPE, SMALL_ARCH, seed=1)
    new, state = adam_step(params, params.zeros_like(), OptimizerState.zeros(params))
    for k in params:
        assert np.array_equal(new[k], params[k])
    assert state.step == 1


def test_adam_first_step_moves_by_learning_rate():
    params = init_params(SMALL_SHAPE, SMALL_ARCH, seed=1)
    ones = type(params)((k, np.ones_like(v)) for k, v in params.items())
    cfg = TrainConfig(learning_rate=0.001)
    new, _ = adam_step(params, ones, OptimizerState.zeros(params), cfg)
    for k in params:
        np.testing.assert_allclose(params[k] - new[k], 0.001 / (1 + 1e-8), rtol=1e-9)


def test_adam_shape_mismatch():
    params = init_params(SMALL_SHAPE, SMALL_ARCH)
    grads = params.zeros_like()
    grads["fc2.b"] = np.zeros(2)
    with pytest.raises(ValueError):
        adam_step(params, grads, OptimizerState.zeros(params))


# --- training ------------------------------------------------------------------

def test_overfits_ten_samples():
    data = toy_set(10)
    res = fit(data, data, TrainConfig(epochs=200, patience=10_000, batch_size=4))
    assert res.epochs_run == 200
    assert all(predict(res.params, v)[1] == y for v, y in data)


def test_loss_halves_on_separable_set():
    data = toy_set(20, separable=True)
    initial = dataset_loss(init_params((4, 8, 8, 3), ArchConfig(), 0), data)
    res = fit(data, data, TrainConfig(epochs=50, patience=10_000, batch_size=4))
    assert dataset_loss(res.params, data) < 0.5 * initial


def test_early_stopping_restores_best_epoch():
    data = toy_set(4, shape=SMALL_SHAPE)
    k = 3
    scripted = [5.0, 4.0, 3.0, 3.5, 4.0, 4.5, 5.0, 6.0]
    seen = {}

    def hook(params, epoch):
        seen[epoch] = params.copy()
        return scripted[epoch - 1]

    res = fit(data, data, TrainConfig(epochs=8, patience=1), SMALL_ARCH, evaluate=hook)
    assert res.epochs_run <= k + 2
    assert res.best_epoch == k
    for name in PARAM_ORDER:
        assert np.array_equal(res.params[name], seen[k][name])


def test_zero_epochs_returns_initial_parameters():
    data = toy_set(4, shape=SMALL_SHAPE)
    init = init_params(SMALL_SHAPE, SMALL_ARCH, seed=9)
    out = train(data, data, TrainConfig(epochs=0), SMALL_ARCH, init=init)
    for name in PARAM_ORDER:
        assert np.array_equal(out[name], init[name])


def test_empty_sets_rejected():
    data = toy_set(2, shape=SMALL_SHAPE)
    with pytest.raises(ValueError):
        fit([], data)
    with pytest.raises(ValueError):
        fit(data, [])


def test_training_is_bitwise_deterministic():
    data = toy_set(6, shape=SMALL_SHAPE, seed=2)
    cfg = TrainConfig(epochs=5, batch_size=4, seed=11)
    a = train(data, data, cfg, SMALL_ARCH)
    b = train(data, data, cfg, SMALL_ARCH)
    for name in PARAM_ORDER:
        assert np.array_equal(a[name], b[name])


# --- prediction ----------------------------------------------------------------

def _with_logit(bias):
    params = init_params(SMALL_SHAPE, SMALL_ARCH).zeros_like()
    params["fc2.b"][:] = bias
    return params


def test_threshold_is_inclusive():
    x = np.zeros(SMALL_SHAPE)
    assert predict(_with_logit(0.0), x) == (0.5, 1)
    score, label = predict(_with_logit(math.log(0.49 / 0.51)), x)
    assert score == pytest.approx(0.49) and label == 0


def test_score_increases_with_output_bias():
    params = init_params(SMALL_SHAPE, SMALL_ARCH, seed=2)
    x = np.random.default_rng(0).uniform(size=SMALL_SHAPE)
    scores = []
    for bias in (-2.0, -0.5, 0.0, 0.7, 3.0):
        params["fc2.b"][:] = bias
        scores.append(forward(x, params))
    assert all(a < b for a, b in zip(scores, scores[1:]))


def test_batch_forward_matches_single():
    params = init_params(SMALL_SHAPE, SMALL_ARCH, seed=2)
    X = np.random.default_rng(0).uniform(size=(3,) + SMALL_SHAPE)
    batch = forward_batch(X, params)
    np.testing.assert_allclose(batch, [forward(x, params) for x in X], rtol=0, atol=1e-15)


# --- checkpoints ---------------------------------------------------------------

def test_checkpoint_round_trip(tmp_path):
    params = init_params(SMALL_SHAPE, SMALL_ARCH, seed=4)
    path = tmp_path / "m.uvsm"
    write_checkpoint(params, path)
    raw = path.read_bytes()
    assert raw[:4] == b"UVSM" and raw[4:8] == (1).to_bytes(4, "little")
    back = read_checkpoint(path)
    assert list(back) == list(PARAM_ORDER)
    for name in PARAM_ORDER:
        assert back[name].dtype == np.float64
        assert np.array_equal(back[name], params[name])
    write_checkpoint(back, tmp_path / "again.uvsm")
    assert (tmp_path / "again.uvsm").read_bytes() == raw


def test_checkpoint_corruption(tmp_path):
    params = init_params(SMALL_SHAPE, SMALL_ARCH, seed=4)
    path = tmp_path / "m.uvsm"
    write_checkpoint(params, path)
    raw = path.read_bytes()
    bad = tmp_path / "bad.uvsm"
    bad.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(ValueError, match="not a model"):
        read_checkpoint(bad)
    bad.write_bytes(raw[:4] + (7).to_bytes(4, "little") + raw[8:])
    with pytest.raises(ValueError, match="version"):
        read_checkpoint(bad)
    bad.write_bytes(raw[:-5])
    with pytest.raises(ValueError, match="truncated"):
        read_checkpoint(bad)
    bad.write_bytes(raw[:8])
    with pytest.raises(ValueError, match="missing"):
        read_checkpoint(bad)
