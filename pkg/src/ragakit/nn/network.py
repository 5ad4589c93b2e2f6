"""Sequential network over a list of ``LayerSpec``."""

from __future__ import annotations

import numpy as np

from ..errors import LabelOutOfRange, NumericError, ShapeMismatch
from .layers import LayerSpec, Softmax, make_layer, softmax


def sparse_ce_from_logits(logits: np.ndarray, labels) -> float:
    """Mean cross-entropy through a fused log-softmax."""
    labels = _check_labels(labels, logits.shape[-1])
    shifted = logits - logits.max(axis=-1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=-1))
    return float(np.mean(log_z - shifted[np.arange(len(labels)), labels]))


def loss_sparse_ce(probs: np.ndarray, labels) -> float:
    labels = _check_labels(labels, probs.shape[-1])
    picked = probs[np.arange(len(labels)), labels]
    return float(-np.mean(np.log(np.maximum(picked, np.finfo(np.float64).tiny))))


def _check_labels(labels, k):
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise LabelOutOfRange(f"labels must lie in [0, {k})")
    return labels.astype(np.intp)


class Network:
    def __init__(self, input_shape, layer_specs: list[LayerSpec], seed: int = 0,
                 dtype=np.float32):
        self.input_shape = tuple(input_shape)
        self.dtype = np.dtype(dtype)
        self.layers = [make_layer(s) for s in layer_specs]
        rng = np.random.default_rng(seed)
        shape = self.input_shape
        for layer in self.layers:
            shape = layer.build(shape, rng, self.dtype)
        self.output_shape = shape

    def param_count(self) -> int:
        return sum(layer.param_count() for layer in self.layers)

    def parameters(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.params.values()]

    def gradients(self) -> list[np.ndarray]:
        return [layer.grads[name] for layer in self.layers for name in layer.params]

    def get_weights(self) -> list[list[np.ndarray]]:
        """Per layer: trainable arrays followed by running statistics."""
        return [
            [a.copy() for a in (*layer.params.values(), *layer.state.values())]
            for layer in self.layers
        ]

    def set_weights(self, weights) -> None:
        if len(weights) != len(self.layers):
            raise ShapeMismatch("layer count differs")
        for layer, arrays in zip(self.layers, weights):
            slots = [(layer.params, k) for k in layer.params] + [(layer.state, k) for k in layer.state]
            if len(slots) != len(arrays):
                raise ShapeMismatch(f"{layer.kind}: expected {len(slots)} arrays")
            for (store, key), arr in zip(slots, arrays):
                if store[key].shape != tuple(arr.shape):
                    raise ShapeMismatch(f"{layer.kind}.{key}: {arr.shape} vs {store[key].shape}")
                store[key] = np.array(arr, dtype=store[key].dtype)

    def forward(self, x, training: bool = False, rng=None) -> np.ndarray:
        x = np.asarray(x, dtype=self.dtype)
        if x.shape[1:] != self.input_shape:
            raise ShapeMismatch(f"expected input (batch, {self.input_shape}), got {x.shape}")
        for layer in self.layers:
            x = layer.forward(x, training, rng)
        return x

    def backward(self, dy) -> np.ndarray:
        for layer in reversed(self.layers):
            dy = layer.backward(dy)
        return dy

    def loss_and_grad(self, x, labels, rng=None, training: bool = True,
                      input_grad: bool = False) -> tuple[float, np.ndarray]:
        """Forward, mean sparse cross-entropy and backward.

        Returns the loss and the class probabilities. With a trailing softmax
        the logit gradient is formed directly as (p - onehot) / n.
        """
        self.layers[0].input_grad = input_grad
        labels = _check_labels(labels, self.output_shape[-1])
        probs = self.forward(x, training, rng)
        n = len(labels)
        last = self.layers[-1]
        if isinstance(last, Softmax):
            loss = sparse_ce_from_logits(last.logits, labels)
            dz = probs.copy()
            dz[np.arange(n), labels] -= 1.0
            dz /= n
            for layer in reversed(self.layers[:-1]):
                dz = layer.backward(dz)
        else:
            loss = loss_sparse_ce(probs, labels)
            dp = np.zeros_like(probs)
            dp[np.arange(n), labels] = -1.0 / (n * np.maximum(probs[np.arange(n), labels], 1e-300))
            self.backward(dp)
        if not np.isfinite(loss):
            raise NumericError("non-finite loss")
        return loss, probs

    def predict_proba(self, x, batch_size: int = 64, transform=None) -> np.ndarray:
        x = np.asarray(x)
        transform = transform or (lambda b: b)
        out = [self.forward(transform(x[s : s + batch_size])) for s in range(0, len(x), batch_size)]
        return np.concatenate(out) if out else np.zeros((0,) + self.output_shape)

    def predict(self, x, batch_size: int = 64, transform=None) -> np.ndarray:
        return self.predict_proba(x, batch_size, transform).argmax(axis=-1)


__all__ = ["Network", "loss_sparse_ce", "sparse_ce_from_logits", "softmax"]
