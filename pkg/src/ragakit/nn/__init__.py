"""Minimal numpy neural-network engine."""

from .layers import LAYER_KINDS, LayerSpec, softmax
from .network import Network, loss_sparse_ce, sparse_ce_from_logits
from .optim import Adam, RMSprop, make_optimizer
from .serialize import load_weights, save_weights
from .train import EarlyStopping, TrainConfig, TrainReport, early_stopping_trace, evaluate, train

__all__ = [
    "LAYER_KINDS", "LayerSpec", "softmax", "Network", "loss_sparse_ce", "sparse_ce_from_logits",
    "Adam", "RMSprop", "make_optimizer", "load_weights", "save_weights", "EarlyStopping",
    "TrainConfig", "TrainReport", "early_stopping_trace", "evaluate", "train",
]
