"""Layer vocabulary with hand-written backward passes.

Layouts (batch axis first, omitted from ``input_shape``):

* dense      (features,)
* conv1d     (channels, length)        -- channels first, so a (1, 30) row is
                                          one channel of length 30
* conv2d     (height, width, channels) -- channels last, like the images
* lstm       (steps, features)
* batchnorm  normalizes along ``axis`` (counted without the batch axis)

Every layer keeps what its backward pass needs from the latest forward call,
so ``backward`` must follow the matching ``forward``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeMismatch

LAYER_KINDS = (
    "dense", "conv1d", "conv2d", "maxpool2d", "flatten",
    "batchnorm", "lstm", "dropout", "relu", "softmax",
)

BN_MOMENTUM = 0.99
BN_EPS = 1e-6
# upper bound on im2col buffer size (elements) per chunk
IM2COL_BUDGET = 1 << 25


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    units: int = 0
    kernel: int = 0
    pool: int = 2
    rate: float = 0.0
    recurrent_rate: float = 0.0
    axis: int = -1
    init: str = "he"
    return_sequences: bool = True

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.kind in ("conv1d", "conv2d") and self.kernel < 1:
            raise ValueError("kernel size must be >= 1")
        if not (0.0 <= self.rate < 1.0 and 0.0 <= self.recurrent_rate < 1.0):
            raise ValueError("dropout rates must lie in [0, 1)")


def he_normal(rng, shape, fan_in, dtype):
    return (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype)


def glorot_uniform(rng, shape, fan_in, fan_out, dtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, shape).astype(dtype)


def _init(spec, rng, shape, fan_in, fan_out, dtype):
    if spec.init == "glorot":
        return glorot_uniform(rng, shape, fan_in, fan_out, dtype)
    return he_normal(rng, shape, fan_in, dtype)


class Layer:
    kind = ""
    # cleared on a network's first layer; layers may then skip d(loss)/d(input)
    input_grad = True

    def __init__(self, spec: LayerSpec):
        self.spec = spec
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.state: dict[str, np.ndarray] = {}
        self.input_shape: tuple = ()
        self.output_shape: tuple = ()

    def build(self, input_shape, rng, dtype) -> tuple:
        self.input_shape = tuple(input_shape)
        self.output_shape = self.infer_shape(self.input_shape)
        self._create(rng, dtype)
        return self.output_shape

    def infer_shape(self, input_shape) -> tuple:
        return tuple(input_shape)

    def _create(self, rng, dtype):
        pass

    def param_count(self) -> int:
        return sum(p.size for p in self.params.values())

    def forward(self, x, training=False, rng=None):
        raise NotImplementedError

    def backward(self, dy):
        raise NotImplementedError


class Dense(Layer):
    kind = "dense"

    def infer_shape(self, input_shape):
        if len(input_shape) != 1:
            raise ShapeMismatch(f"dense expects flat input, got {input_shape}")
        return (self.spec.units,)

    def _create(self, rng, dtype):
        d, u = self.input_shape[0], self.spec.units
        self.params = {
            "W": _init(self.spec, rng, (d, u), d, u, dtype),
            "b": np.zeros(u, dtype=dtype),
        }

    def forward(self, x, training=False, rng=None):
        self._x = x
        return x @ self.params["W"] + self.params["b"]

    def backward(self, dy):
        self.grads = {"W": self._x.T @ dy, "b": dy.sum(axis=0)}
        return dy @ self.params["W"].T


class Conv1D(Layer):
    """Stride-1 'same' convolution over (channels, length) inputs."""

    kind = "conv1d"

    def infer_shape(self, input_shape):
        if len(input_shape) != 2:
            raise ShapeMismatch(f"conv1d expects (channels, length), got {input_shape}")
        return (self.spec.units, input_shape[1])

    def _create(self, rng, dtype):
        c, k, f = self.input_shape[0], self.spec.kernel, self.spec.units
        self.params = {
            "W": _init(self.spec, rng, (f, c, k), c * k, f * k, dtype),
            "b": np.zeros(f, dtype=dtype),
        }

    def _cols(self, x):
        k = self.spec.kernel
        left = (k - 1) // 2
        xp = np.pad(x, ((0, 0), (0, 0), (left, k - 1 - left)))
        win = sliding_window_view(xp, k, axis=2)  # (N, C, L, K)
        n, c, length, _ = win.shape
        return win.transpose(0, 2, 1, 3).reshape(n * length, c * k)

    def forward(self, x, training=False, rng=None):
        self._x = x
        n, _, length = x.shape
        f = self.spec.units
        out = self._cols(x) @ self.params["W"].reshape(f, -1).T + self.params["b"]
        return out.reshape(n, length, f).transpose(0, 2, 1)

    def backward(self, dy):
        x = self._x
        n, c, length = x.shape
        f, k = self.spec.units, self.spec.kernel
        left = (k - 1) // 2
        d2 = dy.transpose(0, 2, 1).reshape(n * length, f)
        cols = self._cols(x)
        wmat = self.params["W"].reshape(f, -1)
        self.grads = {"W": (d2.T @ cols).reshape(f, c, k), "b": d2.sum(axis=0)}
        dcols = (d2 @ wmat).reshape(n, length, c, k)
        dxp = np.zeros((n, c, length + k - 1), dtype=dy.dtype)
        for j in range(k):
            dxp[:, :, j : j + length] += dcols[:, :, :, j].transpose(0, 2, 1)
        return dxp[:, :, left : left + length]


class Conv2D(Layer):
    """Stride-1 'same' convolution over (height, width, channels) inputs.

    im2col is applied in batch chunks bounded by ``IM2COL_BUDGET``.
    """

    kind = "conv2d"

    def infer_shape(self, input_shape):
        if len(input_shape) != 3:
            raise ShapeMismatch(f"conv2d expects (h, w, channels), got {input_shape}")
        h, w, _ = input_shape
        return (h, w, self.spec.units)

    def _create(self, rng, dtype):
        c, k, f = self.input_shape[2], self.spec.kernel, self.spec.units
        self.params = {
            "W": _init(self.spec, rng, (k, k, c, f), c * k * k, f * k * k, dtype),
            "b": np.zeros(f, dtype=dtype),
        }

    def _pad(self, x):
        k = self.spec.kernel
        lo = (k - 1) // 2
        return np.pad(x, ((0, 0), (lo, k - 1 - lo), (lo, k - 1 - lo), (0, 0)))

    def _cols(self, xp):
        k = self.spec.kernel
        win = sliding_window_view(xp, (k, k), axis=(1, 2))  # (n, H, W, C, k, k)
        n, h, w, c = win.shape[:4]
        return win.transpose(0, 1, 2, 4, 5, 3).reshape(n * h * w, k * k * c)

    def _chunk(self, n):
        h, w, c = self.input_shape
        per_item = h * w * c * self.spec.kernel ** 2
        return max(1, min(n, IM2COL_BUDGET // per_item))

    def forward(self, x, training=False, rng=None):
        self._x = x
        n, h, w, _ = x.shape
        f = self.spec.units
        wmat = self.params["W"].reshape(-1, f)
        out = np.empty((n, h, w, f), dtype=np.result_type(x, wmat))
        step = self._chunk(n)
        for s in range(0, n, step):
            cols = self._cols(self._pad(x[s : s + step]))
            out[s : s + step] = (cols @ wmat + self.params["b"]).reshape(-1, h, w, f)
        return out

    def backward(self, dy):
        x = self._x
        n, h, w, c = x.shape
        k, f = self.spec.kernel, self.spec.units
        wmat = self.params["W"].reshape(-1, f)
        dW = np.zeros_like(wmat)
        dx = np.empty_like(x, dtype=dy.dtype) if self.input_grad else None
        lo = (k - 1) // 2
        step = self._chunk(n)
        for s in range(0, n, step):
            xc = x[s : s + step]
            m = len(xc)
            d2 = dy[s : s + step].reshape(-1, f)
            dW += self._cols(self._pad(xc)).T @ d2
            if not self.input_grad:
                continue
            dcols = (d2 @ wmat.T).reshape(m, h, w, k, k, c)
            dxp = np.zeros((m, h + k - 1, w + k - 1, c), dtype=dy.dtype)
            for i in range(k):
                for j in range(k):
                    dxp[:, i : i + h, j : j + w] += dcols[:, :, :, i, j]
            dx[s : s + step] = dxp[:, lo : lo + h, lo : lo + w]
        self.grads = {"W": dW.reshape(k, k, c, f), "b": dy.sum(axis=(0, 1, 2))}
        return dx


class MaxPool2D(Layer):
    kind = "maxpool2d"

    def infer_shape(self, input_shape):
        if len(input_shape) != 3:
            raise ShapeMismatch(f"maxpool2d expects (h, w, channels), got {input_shape}")
        p = self.spec.pool
        h, w, c = input_shape
        return (h // p, w // p, c)

    def _views(self, x):
        p = self.spec.pool
        ho, wo, _ = self.output_shape
        x = x[:, : ho * p, : wo * p]
        return [x[:, i::p, j::p] for i in range(p) for j in range(p)]

    def forward(self, x, training=False, rng=None):
        self._xshape = x.shape
        if self.spec.pool == 2:
            return self._forward2(x)
        views = self._views(x)
        out = views[0].copy()
        for v in views[1:]:
            np.maximum(out, v, out=out)
        # the first window position holding the maximum receives the gradient
        arg = np.full(out.shape, len(views) - 1, dtype=np.uint8)
        for k in range(len(views) - 2, -1, -1):
            arg[views[k] == out] = k
        self._arg = arg
        return out

    def _forward2(self, x):
        n = x.shape[0]
        ho, wo, c = self.output_shape
        out = np.empty((n, ho, wo, c), dtype=x.dtype)
        arg = np.empty((n, ho, wo, c), dtype=np.uint8)
        # per sample, so temporaries stay small
        for i in range(n):
            r = x[i, : 2 * ho, : 2 * wo].reshape(ho, 2, wo, 2, c)
            v0, v1, v2, v3 = r[:, 0, :, 0], r[:, 0, :, 1], r[:, 1, :, 0], r[:, 1, :, 1]
            m01 = np.maximum(v0, v1)
            m23 = np.maximum(v2, v3)
            lower_wins = m23 > m01
            np.maximum(m01, m23, out=out[i])
            np.add(v3 > v2, 2, out=arg[i], dtype=np.uint8)
            np.copyto(arg[i], v1 > v0, where=~lower_wins)
        self._arg = arg
        return out

    def backward(self, dy):
        dx = np.zeros(self._xshape, dtype=dy.dtype)
        for i in range(dy.shape[0]):
            for k, view in enumerate(self._views(dx[i : i + 1])):
                np.multiply(dy[i : i + 1], self._arg[i : i + 1] == k, out=view)
        return dx


class Flatten(Layer):
    kind = "flatten"

    def infer_shape(self, input_shape):
        return (prod(input_shape),)

    def forward(self, x, training=False, rng=None):
        self._xshape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy):
        return dy.reshape(self._xshape)


class BatchNorm(Layer):
    kind = "batchnorm"
    # rows per chunk on the channels-last path
    CHUNK_ROWS = 1 << 16

    def _channel_axis(self):
        return self.spec.axis % len(self.input_shape) + 1

    def _create(self, rng, dtype):
        c = self.input_shape[self._channel_axis() - 1]
        self.params = {"gamma": np.ones(c, dtype=dtype), "beta": np.zeros(c, dtype=dtype)}
        self.state = {"mean": np.zeros(c, dtype=dtype), "var": np.ones(c, dtype=dtype)}

    def _bshape(self):
        shape = [1] * (len(self.input_shape) + 1)
        shape[self._channel_axis()] = -1
        return shape

    def _update_running(self, mean, var, dtype):
        self.state["mean"] = (BN_MOMENTUM * self.state["mean"] + (1 - BN_MOMENTUM) * mean).astype(dtype)
        self.state["var"] = (BN_MOMENTUM * self.state["var"] + (1 - BN_MOMENTUM) * var).astype(dtype)

    def forward(self, x, training=False, rng=None):
        if self._channel_axis() == x.ndim - 1:
            return self._forward_rows(x, training)
        ax = self._channel_axis()
        red = tuple(i for i in range(x.ndim) if i != ax)
        bs = self._bshape()
        if training:
            mean = x.mean(axis=red)
            var = x.var(axis=red)
            self._update_running(mean, var, x.dtype)
        else:
            mean, var = self.state["mean"], self.state["var"]
        invstd = (1.0 / np.sqrt(var + BN_EPS)).astype(x.dtype)
        xhat = (x - mean.reshape(bs)) * invstd.reshape(bs)
        self._xhat, self._invstd = xhat, invstd
        return xhat * self.params["gamma"].reshape(bs) + self.params["beta"].reshape(bs)

    def _forward_rows(self, x, training):
        c = x.shape[-1]
        x2 = x.reshape(-1, c)
        step = self.CHUNK_ROWS
        if training:
            total = np.zeros(c)
            centred_sq = np.zeros(c)
            for s in range(0, len(x2), step):
                total += x2[s : s + step].sum(axis=0, dtype=np.float64)
            mean = total / len(x2)
            for s in range(0, len(x2), step):
                d = x2[s : s + step] - mean.astype(x.dtype)
                centred_sq += np.einsum("ij,ij->j", d, d, dtype=np.float64)
            var = centred_sq / len(x2)
            self._update_running(mean, var, x.dtype)
        else:
            mean, var = self.state["mean"], self.state["var"]
        invstd = (1.0 / np.sqrt(var + BN_EPS)).astype(x.dtype)
        mean = np.asarray(mean).astype(x.dtype)
        gamma, beta = self.params["gamma"], self.params["beta"]
        xhat = np.empty_like(x2)
        y = np.empty_like(x2)
        for s in range(0, len(x2), step):
            h = xhat[s : s + step]
            np.subtract(x2[s : s + step], mean, out=h)
            h *= invstd
            np.multiply(h, gamma, out=y[s : s + step])
            y[s : s + step] += beta
        self._xhat, self._invstd = xhat.reshape(x.shape), invstd
        return y.reshape(x.shape)

    def backward(self, dy):
        xhat = self._xhat
        ax = self._channel_axis()
        c = xhat.shape[ax]
        m = dy.size // c
        if ax == dy.ndim - 1:
            return self._backward_rows(dy, m)
        red = tuple(i for i in range(dy.ndim) if i != ax)
        bs = self._bshape()
        dbeta = dy.sum(axis=red)
        dgamma = (dy * xhat).sum(axis=red)
        self.grads = {"gamma": dgamma, "beta": dbeta}
        g = (self.params["gamma"] * self._invstd / m).reshape(bs)
        return g * (m * dy - dbeta.reshape(bs) - xhat * dgamma.reshape(bs))

    def _backward_rows(self, dy, m):
        c = dy.shape[-1]
        d2 = dy.reshape(-1, c)
        h2 = self._xhat.reshape(-1, c)
        step = self.CHUNK_ROWS
        dbeta = np.zeros(c)
        dgamma = np.zeros(c)
        for s in range(0, len(d2), step):
            dbeta += d2[s : s + step].sum(axis=0, dtype=np.float64)
            dgamma += np.einsum("ij,ij->j", d2[s : s + step], h2[s : s + step], dtype=np.float64)
        dtype = dy.dtype
        self.grads = {"gamma": dgamma.astype(dtype), "beta": dbeta.astype(dtype)}
        g = (self.params["gamma"] * self._invstd / m).astype(dtype)
        dbeta_t, dgamma_t = dbeta.astype(dtype), dgamma.astype(dtype)
        dx = np.empty_like(d2)
        for s in range(0, len(d2), step):
            out = dx[s : s + step]
            np.multiply(d2[s : s + step], m, out=out)
            out -= dbeta_t
            out -= h2[s : s + step] * dgamma_t
            out *= g
        return dx.reshape(dy.shape)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class LSTM(Layer):
    """Gate order input, forget, cell, output. Dropout masks are drawn once
    per batch and shared across time steps (inverted scaling)."""

    kind = "lstm"

    def infer_shape(self, input_shape):
        if len(input_shape) != 2:
            raise ShapeMismatch(f"lstm expects (steps, features), got {input_shape}")
        steps = input_shape[0]
        if self.spec.return_sequences:
            return (steps, self.spec.units)
        return (self.spec.units,)

    def _create(self, rng, dtype):
        f, u = self.input_shape[1], self.spec.units
        b = np.zeros(4 * u, dtype=dtype)
        b[u : 2 * u] = 1.0
        self.params = {
            "W": glorot_uniform(rng, (f, 4 * u), f, 4 * u, dtype),
            "U": glorot_uniform(rng, (u, 4 * u), u, 4 * u, dtype),
            "b": b,
        }

    def _mask(self, shape, rate, training, rng, dtype):
        if not training or rate == 0.0:
            return None
        return ((rng.random(shape) >= rate) / (1.0 - rate)).astype(dtype)

    def forward(self, x, training=False, rng=None):
        n, steps, _ = x.shape
        u = self.spec.units
        W, U, b = self.params["W"], self.params["U"], self.params["b"]
        mx = self._mask((n, x.shape[2]), self.spec.rate, training, rng, x.dtype)
        mh = self._mask((n, u), self.spec.recurrent_rate, training, rng, x.dtype)
        h = np.zeros((n, u), dtype=x.dtype)
        c = np.zeros((n, u), dtype=x.dtype)
        cache = []
        hs = np.empty((n, steps, u), dtype=x.dtype)
        for t in range(steps):
            xt = x[:, t] if mx is None else x[:, t] * mx
            hd = h if mh is None else h * mh
            z = xt @ W + hd @ U + b
            i = _sigmoid(z[:, :u])
            f = _sigmoid(z[:, u : 2 * u])
            g = np.tanh(z[:, 2 * u : 3 * u])
            o = _sigmoid(z[:, 3 * u :])
            c_prev = c
            c = f * c + i * g
            tc = np.tanh(c)
            h = o * tc
            hs[:, t] = h
            cache.append((xt, hd, i, f, g, o, c_prev, tc))
        self._cache, self._masks = cache, (mx, mh)
        return hs if self.spec.return_sequences else h

    def backward(self, dy):
        u = self.spec.units
        W, U = self.params["W"], self.params["U"]
        mx, mh = self._masks
        steps = len(self._cache)
        n = dy.shape[0]
        if not self.spec.return_sequences:
            full = np.zeros((n, steps, u), dtype=dy.dtype)
            full[:, -1] = dy
            dy = full
        dW, dU, db = np.zeros_like(W), np.zeros_like(U), np.zeros(4 * u, dtype=W.dtype)
        dx = np.empty((n, steps, W.shape[0]), dtype=dy.dtype)
        dh_next = np.zeros((n, u), dtype=dy.dtype)
        dc_next = np.zeros((n, u), dtype=dy.dtype)
        for t in reversed(range(steps)):
            xt, hd, i, f, g, o, c_prev, tc = self._cache[t]
            dh = dy[:, t] + dh_next
            dc = dh * o * (1.0 - tc ** 2) + dc_next
            dz = np.concatenate(
                [dc * g * i * (1 - i), dc * c_prev * f * (1 - f),
                 dc * i * (1 - g ** 2), dh * tc * o * (1 - o)],
                axis=1,
            )
            dW += xt.T @ dz
            dU += hd.T @ dz
            db += dz.sum(axis=0)
            dxt = dz @ W.T
            dx[:, t] = dxt if mx is None else dxt * mx
            dhd = dz @ U.T
            dh_next = dhd if mh is None else dhd * mh
            dc_next = dc * f
        self.grads = {"W": dW, "U": dU, "b": db}
        return dx


class Dropout(Layer):
    kind = "dropout"

    def forward(self, x, training=False, rng=None):
        if not training or self.spec.rate == 0.0:
            self._mask = None
            return x
        self._mask = ((rng.random(x.shape) >= self.spec.rate) / (1.0 - self.spec.rate)).astype(x.dtype)
        return x * self._mask

    def backward(self, dy):
        return dy if self._mask is None else dy * self._mask


class ReLU(Layer):
    kind = "relu"

    def forward(self, x, training=False, rng=None):
        self._y = np.maximum(x, 0)
        return self._y

    def backward(self, dy):
        dx = dy * (self._y > 0)
        return dx.astype(dy.dtype, copy=False)


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


class Softmax(Layer):
    kind = "softmax"

    def forward(self, x, training=False, rng=None):
        self.logits = x
        self._p = softmax(x)
        return self._p

    def backward(self, dy):
        p = self._p
        return p * (dy - (dy * p).sum(axis=-1, keepdims=True))


_REGISTRY = {cls.kind: cls for cls in
             (Dense, Conv1D, Conv2D, MaxPool2D, Flatten, BatchNorm, LSTM, Dropout, ReLU, Softmax)}


def make_layer(spec: LayerSpec) -> Layer:
    return _REGISTRY[spec.kind](spec)
