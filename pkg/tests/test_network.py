import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ragakit.errors import EmptySplit, LabelOutOfRange, ShapeMismatch, WeightFormatError
from ragakit.nn import (
    Adam, LayerSpec, Network, RMSprop, TrainConfig, early_stopping_trace, evaluate,
    load_weights, loss_sparse_ce, save_weights, sparse_ce_from_logits, train,
)
from ragakit.nn.serialize import dumps, loads


def mlp(n_in=2, hidden=16, k=3, seed=0, dtype=np.float64):
    return Network((n_in,), [
        LayerSpec("dense", units=hidden), LayerSpec("relu"),
        LayerSpec("dense", units=k, init="glorot"), LayerSpec("softmax"),
    ], seed=seed, dtype=dtype)


# ---- loss -------------------------------------------------------------------

def test_uniform_prediction_loss_is_ln_k():
    assert math.isclose(loss_sparse_ce(np.full((4, 10), 0.1), [0, 3, 9, 5]), math.log(10))
    assert math.isclose(sparse_ce_from_logits(np.zeros((2, 10)), [1, 2]), math.log(10))


def test_loss_worked_example():
    p = np.array([[0.7, 0.2, 0.1], [0.25, 0.5, 0.25]])
    expected = -(math.log(0.7) + math.log(0.5)) / 2
    assert math.isclose(loss_sparse_ce(p, [0, 1]), expected)


@given(st.integers(0, 10 ** 6))
def test_fused_loss_matches_two_step(seed):
    rng = np.random.default_rng(seed)
    z = rng.normal(0, 5, (6, 4))
    y = rng.integers(0, 4, 6)
    p = np.exp(z - z.max(1, keepdims=True))
    p /= p.sum(1, keepdims=True)
    assert math.isclose(sparse_ce_from_logits(z, y), loss_sparse_ce(p, y), rel_tol=1e-9, abs_tol=1e-12)


def test_confident_correct_loss_near_zero():
    z = np.array([[50.0, 0, 0]])
    assert sparse_ce_from_logits(z, [0]) < 1e-20


@pytest.mark.parametrize("bad", [[-1, 0], [0, 3]])
def test_label_out_of_range(bad):
    with pytest.raises(LabelOutOfRange):
        loss_sparse_ce(np.full((2, 3), 1 / 3), bad)
    with pytest.raises(LabelOutOfRange):
        mlp().loss_and_grad(np.zeros((2, 2)), bad)


def test_duplicated_batch_gives_same_gradient():
    net = mlp()
    rng = np.random.default_rng(3)
    x, y = rng.normal(size=(5, 2)), rng.integers(0, 3, 5)
    l1, _ = net.loss_and_grad(x, y)
    g1 = [g.copy() for g in net.gradients()]
    l2, _ = net.loss_and_grad(np.concatenate([x, x]), np.concatenate([y, y]))
    assert math.isclose(l1, l2, rel_tol=1e-12)
    for a, b in zip(g1, net.gradients()):
        np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-15)


def test_zero_input_gives_zero_first_weight_gradient():
    net = mlp()
    net.loss_and_grad(np.zeros((4, 2)), [0, 1, 2, 0])
    assert not net.gradients()[0].any()
    # hidden pre-activations sit at the relu kink, so only the head bias moves
    np.testing.assert_allclose(net.gradients()[3], (np.full(3, 1 / 3) - [.5, .25, .25]), atol=1e-12)


def test_predict_batches_agree():
    net = mlp()
    x = np.random.default_rng(0).normal(size=(37, 2))
    np.testing.assert_allclose(net.predict_proba(x, batch_size=5), net.forward(x), rtol=1e-12)


def test_set_weights_validates():
    net = mlp()
    w = net.get_weights()
    w[0][0] = np.zeros((3, 3))
    with pytest.raises(ShapeMismatch):
        net.set_weights(w)
    with pytest.raises(ShapeMismatch):
        net.set_weights(w[:1])


# ---- optimizers --------------------------------------------------------------

def quadratic_run(opt, steps, w0):
    w = [w0.copy()]
    for _ in range(steps):
        opt.step(w, [w[0].copy()])  # gradient of |w|^2 / 2
    return w[0]


def test_adam_converges_on_quadratic():
    w0 = np.random.default_rng(0).normal(size=10)
    w = quadratic_run(Adam(lr=0.05), 200, w0)
    assert np.linalg.norm(w) < 0.1


def test_rmsprop_converges_on_quadratic():
    w0 = np.random.default_rng(0).normal(size=10)
    w = quadratic_run(RMSprop(lr=0.01), 300, w0)
    assert np.linalg.norm(w) < 0.1


@pytest.mark.parametrize("opt", [Adam(), RMSprop()], ids=["adam", "rmsprop"])
def test_zero_gradient_is_fixed_point(opt):
    w = np.arange(6.0)
    p = [w.copy()]
    for _ in range(5):
        opt.step(p, [np.zeros(6)])
    np.testing.assert_array_equal(p[0], w)


def test_adam_first_step_is_lr_times_sign():
    g = np.array([3.0, -0.2, 1e-3, -50.0])
    p = [np.zeros(4)]
    Adam(lr=0.01).step(p, [g])
    np.testing.assert_allclose(p[0], -0.01 * np.sign(g), rtol=1e-3)


def test_adam_matches_scalar_reference():
    lr, b1, b2, eps = 0.02, 0.9, 0.999, 1e-7
    rng = np.random.default_rng(1)
    grads = rng.normal(size=(25, 3))
    p = [np.ones(3)]
    opt = Adam(lr)
    for g in grads:
        opt.step(p, [g])
    for j in range(3):
        w, m, v = 1.0, 0.0, 0.0
        for t, g in enumerate(grads[:, j], start=1):
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            w -= lr * (m / (1 - b1 ** t)) / (math.sqrt(v / (1 - b2 ** t)) + eps)
        assert math.isclose(p[0][j], w, rel_tol=1e-12)


def test_rmsprop_matches_scalar_reference():
    lr, rho, eps = 0.003, 0.9, 1e-7
    grads = np.random.default_rng(2).normal(size=(25, 2))
    p = [np.zeros(2)]
    opt = RMSprop(lr)
    for g in grads:
        opt.step(p, [g])
    for j in range(2):
        w, v = 0.0, 0.0
        for g in grads[:, j]:
            v = rho * v + (1 - rho) * g * g
            w -= lr * g / (math.sqrt(v) + eps)
        assert math.isclose(p[0][j], w, rel_tol=1e-12, abs_tol=1e-15)


def test_optimizer_chunking_is_transparent(monkeypatch):
    import ragakit.nn.optim as O

    g = np.random.default_rng(0).normal(size=(7, 11))
    a = [np.ones((7, 11))]
    Adam(0.1).step(a, [g])
    monkeypatch.setattr(O, "CHUNK", 5)
    b = [np.ones((7, 11))]
    Adam(0.1).step(b, [g])
    np.testing.assert_array_equal(a[0], b[0])


# ---- training loop -----------------------------------------------------------

@pytest.mark.parametrize("scores, patience, expected", [
    ([.5, .6, .6, .6, .6], 3, (5, 2)),
    ([.5, .6, .7, .8], 3, (4, 4)),
    ([.9, .1, .2, .3, .95], 3, (4, 1)),
    ([.4, .4, .4], 1, (2, 1)),
    ([.1, .2, .15, .25, .2, .2, .2], 3, (7, 4)),
])
def test_early_stopping_trace(scores, patience, expected):
    assert early_stopping_trace(scores, patience) == expected


def blobs(n_per=30, seed=0):
    rng = np.random.default_rng(seed)
    centers = np.array([[0, 4], [4, -2], [-4, -2]])
    x = np.concatenate([c + rng.normal(0, 0.5, (n_per, 2)) for c in centers])
    return x, np.repeat(np.arange(3), n_per)


def test_training_separates_blobs():
    x, y = blobs()
    net = mlp(seed=1)
    cfg = TrainConfig(epochs=200, batch_size=16, patience=200, learning_rate=0.01)
    train(net, x, y, x, y, cfg)
    assert evaluate(net, x, y)[1] == 1.0


def test_training_is_deterministic():
    x, y = blobs(seed=4)
    cfg = TrainConfig(epochs=5, batch_size=8, seed=9)
    nets = [mlp(seed=2, dtype=np.float32) for _ in range(2)]
    reports = [train(n, x, y, x[::3], y[::3], cfg) for n in nets]
    assert reports[0].to_dict() == reports[1].to_dict()
    for a, b in zip(nets[0].parameters(), nets[1].parameters()):
        np.testing.assert_array_equal(a, b)


def test_best_weights_are_restored():
    x, y = blobs(seed=5)
    vx, vy = blobs(n_per=10, seed=6)
    net = mlp(seed=3)
    rep = train(net, x, y, vx, vy, TrainConfig(epochs=12, batch_size=8, patience=3, learning_rate=0.05))
    assert rep.best_epoch == int(np.argmax(rep.val_accuracy)) + 1
    assert evaluate(net, vx, vy)[1] == max(rep.val_accuracy)
    assert len(rep.val_accuracy) == rep.stopped_epoch


def test_empty_split_rejected():
    x, y = blobs()
    with pytest.raises(EmptySplit):
        train(mlp(), x, y, x[:0], y[:0], TrainConfig(epochs=1))


@pytest.mark.parametrize("kw", [{"optimizer": "sgd"}, {"learning_rate": 0}, {"patience": 0}])
def test_train_config_validation(kw):
    with pytest.raises(ValueError):
        TrainConfig(**kw)


# ---- weight files -----------------------------------------------------------

def bn_net(seed=0):
    return Network((3, 4), [
        LayerSpec("conv1d", units=2, kernel=3), LayerSpec("batchnorm", axis=0), LayerSpec("flatten"),
        LayerSpec("dense", units=3),
        LayerSpec("softmax"),
    ], seed=seed)


def test_weights_round_trip(tmp_path):
    a = bn_net(0)
    x = np.random.default_rng(0).normal(size=(6, 3, 4)).astype(np.float32)
    a.forward(x, training=True)  # moves the running statistics off their defaults
    save_weights(tmp_path / "w.rglb", a)
    b = bn_net(1)
    load_weights(tmp_path / "w.rglb", b)
    for wa, wb in zip(a.get_weights(), b.get_weights()):
        for u, v in zip(wa, wb):
            np.testing.assert_array_equal(u, v)
    np.testing.assert_array_equal(a.forward(x), b.forward(x))


def test_weight_file_layout():
    data = dumps(["dense"], [[np.ones((2, 3), np.float32), np.zeros(3, np.float32)]])
    assert data[:4] == b"RGLB"
    # header 10, layer 3, two arrays of (1 + 4*ndim + 4*size) bytes
    assert len(data) == 10 + 3 + (1 + 8 + 24) + (1 + 4 + 12)
    kinds, w = loads(data)
    assert kinds == ["dense"] and w[0][0].shape == (2, 3)


@pytest.mark.parametrize("mutate", [
    lambda d: b"XXXX" + d[4:],
    lambda d: d[:-5],
    lambda d: d[:4] + b"\x09\x00" + d[6:],
])
def test_corrupt_weight_files(mutate):
    data = dumps([l.kind for l in bn_net().layers], bn_net().get_weights())
    with pytest.raises(WeightFormatError):
        loads(mutate(data))


def test_weight_kind_mismatch(tmp_path):
    save_weights(tmp_path / "w.rglb", bn_net())
    with pytest.raises(WeightFormatError):
        load_weights(tmp_path / "w.rglb", mlp())


def test_adam_on_squared_norm_from_ones():
    # f(w) = |w|^2, gradient 2w
    w = [np.ones(2)]
    opt = Adam(lr=0.01)
    for _ in range(200):
        opt.step(w, [2 * w[0]])
    assert np.linalg.norm(w[0]) < 0.1


def test_one_hot_predictions_give_no_learning_signal():
    net = Network((3,), [LayerSpec("dense", units=3), LayerSpec("softmax")], dtype=np.float64)
    W, b = net.parameters()
    W[...] = 60 * np.eye(3)
    b[...] = 0
    x = np.eye(3)
    net.loss_and_grad(x, [0, 1, 2])
    assert np.sqrt(sum(np.sum(g ** 2) for g in net.gradients())) < 1e-6


def test_ann_separates_two_blobs_within_50_epochs():
    from ragakit import models

    rng = np.random.default_rng(0)
    x = np.concatenate([rng.normal(-2, 0.7, (100, 2)), rng.normal(2, 0.7, (100, 2))])
    x[:100, 0] -= 1  # keep a clear margin between the classes
    y = np.repeat([0, 1], 100)
    assert (x[:100].sum(1) < 0).all() and (x[100:].sum(1) > 0).all()
    spec = models.build("ann", n_classes=2, input_shape=(2,))
    net = spec.network(seed=0)
    cfg = TrainConfig(epochs=50, batch_size=32, patience=50)
    train(net, x, y, x, y, cfg)
    assert evaluate(net, x, y)[1] == 1.0
