"""Builders for the four classifiers: cnn1d, lstm, ann (30-value feature rows)
and cnn2d (256x256 RGB spectrogram images)."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import UnknownModel
from .nn import LayerSpec, Network, TrainConfig

MODEL_NAMES = ("cnn1d", "lstm", "ann", "cnn2d")
N_CLASSES = 10
FEATURE_SHAPE = (1, 30)
IMAGE_SHAPE = (256, 256, 3)


@dataclass
class ModelSpec:
    name: str
    input_shape: tuple
    layers: list[LayerSpec]
    train_defaults: TrainConfig = field(default_factory=TrainConfig)

    def network(self, seed: int = 0, dtype=np.float32) -> Network:
        return Network(self.input_shape, self.layers, seed=seed, dtype=dtype)


def _dense(units, bn=True, axis=-1):
    out = [LayerSpec("dense", units=units), LayerSpec("relu")]
    if bn:
        out.append(LayerSpec("batchnorm", axis=axis))
    return out


def _head(n_classes):
    return [LayerSpec("dense", units=n_classes, init="glorot"), LayerSpec("softmax")]


def _cnn1d(n_classes):
    layers = []
    for filters in (128, 256, 512):
        # conv1d output is (filters, length): channel axis 0
        layers += [LayerSpec("conv1d", units=filters, kernel=3), LayerSpec("relu"),
                   LayerSpec("batchnorm", axis=0)]
    layers.append(LayerSpec("flatten"))
    for units in (512, 256, 128, 64):
        layers += _dense(units)
    return layers + _head(n_classes)


def _lstm(n_classes):
    return [
        LayerSpec("lstm", units=128, rate=0.05, recurrent_rate=0.25, init="glorot"),
        LayerSpec("lstm", units=64, init="glorot"),
        LayerSpec("flatten"),
    ] + _head(n_classes)


def _ann(n_classes):
    layers = [LayerSpec("flatten")]
    for units in (512, 256, 128, 64):
        layers += [LayerSpec("dense", units=units), LayerSpec("relu")]
    return layers + _head(n_classes)


def _cnn2d(n_classes):
    layers = []
    for filters in (64, 128, 256):
        layers += [
            LayerSpec("conv2d", units=filters, kernel=3), LayerSpec("relu"),
            LayerSpec("batchnorm"), LayerSpec("maxpool2d", pool=2), LayerSpec("batchnorm"),
        ]
    layers.append(LayerSpec("flatten"))
    for units in (256, 128, 64):
        layers += [LayerSpec("dense", units=units), LayerSpec("relu")]
    return layers + _head(n_classes)


_BUILDERS = {
    "cnn1d": (_cnn1d, FEATURE_SHAPE, TrainConfig("adam", 1e-3, epochs=50, batch_size=32, patience=3)),
    "lstm": (_lstm, FEATURE_SHAPE, TrainConfig("adam", 9e-4, epochs=100, batch_size=32, patience=5)),
    "ann": (_ann, FEATURE_SHAPE, TrainConfig("adam", 1e-3, epochs=50, batch_size=32, patience=3)),
    "cnn2d": (_cnn2d, IMAGE_SHAPE, TrainConfig("rmsprop", 1e-3, epochs=30, batch_size=16, patience=3)),
}


def build(name: str, n_classes: int = N_CLASSES, input_shape=None) -> ModelSpec:
    """Declarative spec for one of ``MODEL_NAMES``.

    ``input_shape`` only exists so tests can push small inputs through the
    same layer stack; the experiment always uses the default shapes.
    """
    if name not in _BUILDERS:
        raise UnknownModel(f"unknown model {name!r}; choose from {', '.join(MODEL_NAMES)}")
    fn, shape, cfg = _BUILDERS[name]
    return ModelSpec(name, tuple(input_shape or shape), fn(n_classes), replace(cfg))


def param_count(spec: ModelSpec) -> int:
    """Exact trainable parameter total, from shape inference alone."""
    from .nn.layers import make_layer

    shape = spec.input_shape
    total = 0
    for ls in spec.layers:
        layer = make_layer(ls)
        layer.input_shape = shape
        out = layer.infer_shape(shape)
        if ls.kind == "dense":
            total += shape[0] * ls.units + ls.units
        elif ls.kind == "conv1d":
            total += shape[0] * ls.kernel * ls.units + ls.units
        elif ls.kind == "conv2d":
            total += shape[2] * ls.kernel ** 2 * ls.units + ls.units
        elif ls.kind == "lstm":
            total += 4 * ls.units * (shape[1] + ls.units + 1)
        elif ls.kind == "batchnorm":
            total += 2 * shape[ls.axis]
        shape = out
    return total


def layer_widths(spec: ModelSpec) -> list[int]:
    return [ls.units for ls in spec.layers if ls.kind in ("dense", "conv1d", "conv2d", "lstm")]
