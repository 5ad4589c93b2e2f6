"""Central-difference gradient checks at float64."""

import numpy as np

from ragakit.nn import LayerSpec, Network
from ragakit.nn.layers import make_layer
from ragakit.nn.network import sparse_ce_from_logits

H = 1e-4
# gradients below this are roundoff, e.g. a BN shift cancelled by a later BN
ZERO = 1e-10


def rel_error(a, b) -> float:
    a, b = np.ravel(a), np.ravel(b)
    denom = np.linalg.norm(a) + np.linalg.norm(b)
    return 0.0 if denom < ZERO else float(np.linalg.norm(a - b) / denom)


def numeric_grad(f, arr, h=H):
    g = np.zeros_like(arr)
    flat, gflat = arr.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        fp = f()
        flat[i] = old - h
        fm = f()
        flat[i] = old
        gflat[i] = (fp - fm) / (2 * h)
    return g


def check_layer(spec: LayerSpec, in_shape, batch=3, training=True, seed=0):
    """Max relative error over the input and every parameter of one layer.

    The scalar objective is sum(layer(x) * R) for a fixed random R.
    """
    rng = np.random.default_rng(seed)
    layer = make_layer(spec)
    layer.build(tuple(in_shape), rng, np.float64)
    x = rng.standard_normal((batch,) + tuple(in_shape))

    def fwd():
        # a fresh, identically seeded generator replays the same dropout masks
        return layer.forward(x, training, np.random.default_rng(seed + 1))

    R = np.random.default_rng(seed + 2).standard_normal(fwd().shape)

    def objective():
        return float(np.sum(fwd() * R))

    fwd()
    dx = layer.backward(R)
    analytic = {name: g.copy() for name, g in layer.grads.items()}
    errors = {"input": rel_error(dx, numeric_grad(objective, x))}
    for name, p in layer.params.items():
        errors[name] = rel_error(analytic[name], numeric_grad(objective, p))
    return errors


def check_network(input_shape, specs, batch=4, n_classes=3, seed=0, training=True):
    """Relative error of every parameter gradient of the mean sparse CE."""
    net = Network(input_shape, specs, seed=seed, dtype=np.float64)
    rng = np.random.default_rng(seed + 5)
    x = rng.standard_normal((batch,) + tuple(input_shape))
    y = rng.integers(0, n_classes, batch)

    def loss():
        net.forward(x, training, np.random.default_rng(seed + 1))
        return sparse_ce_from_logits(net.layers[-1].logits, y)

    net.loss_and_grad(x, y, np.random.default_rng(seed + 1), training)
    analytic = [g.copy() for g in net.gradients()]
    return {
        f"{i}": rel_error(a, numeric_grad(loss, p))
        for i, (a, p) in enumerate(zip(analytic, net.parameters()))
    }
