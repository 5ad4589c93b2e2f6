"""Adam and RMSprop, updating parameter arrays in place.

Updates walk each parameter in flat chunks so temporaries stay small even
for the 67M-weight dense layer of the image model.
"""

from __future__ import annotations

import numpy as np

EPSILON = 1e-7
CHUNK = 1 << 20


def _chunks(*arrays):
    flat = [a.reshape(-1) for a in arrays]
    for s in range(0, flat[0].size, CHUNK):
        yield [f[s : s + CHUNK] for f in flat]


class Adam:
    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = EPSILON):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m: list[np.ndarray] | None = None
        self.v: list[np.ndarray] | None = None

    def step(self, params, grads) -> None:
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        b1, b2 = self.beta1, self.beta2
        for p, g, m, v in zip(params, grads, self.m, self.v):
            g = np.asarray(g, dtype=p.dtype)
            for pc, gc, mc, vc in _chunks(p, g, m, v):
                mc *= b1
                mc += (1.0 - b1) * gc
                vc *= b2
                vc += (1.0 - b2) * np.square(gc)
                denom = np.sqrt(vc / c2)
                denom += self.eps
                pc -= (self.lr / c1) * mc / denom


class RMSprop:
    def __init__(self, lr: float = 1e-3, rho: float = 0.9, eps: float = EPSILON):
        self.lr, self.rho, self.eps = lr, rho, eps
        self.v: list[np.ndarray] | None = None

    def step(self, params, grads) -> None:
        if self.v is None:
            self.v = [np.zeros_like(p) for p in params]
        for p, g, v in zip(params, grads, self.v):
            g = np.asarray(g, dtype=p.dtype)
            for pc, gc, vc in _chunks(p, g, v):
                vc *= self.rho
                vc += (1.0 - self.rho) * np.square(gc)
                denom = np.sqrt(vc)
                denom += self.eps
                pc -= self.lr * gc / denom


def make_optimizer(name: str, lr: float):
    if name == "adam":
        return Adam(lr)
    if name == "rmsprop":
        return RMSprop(lr)
    raise ValueError(f"unknown optimizer {name!r}")
