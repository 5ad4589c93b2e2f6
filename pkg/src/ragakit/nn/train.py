"""Mini-batch training loop with validation-accuracy early stopping."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import EmptySplit
from .network import Network
from .optim import make_optimizer

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    epochs: int = 50
    batch_size: int = 32
    patience: int = 3
    seed: int = 0
    monitor: str = "val_accuracy"

    def __post_init__(self):
        if self.optimizer not in ("adam", "rmsprop"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.patience < 1 or self.batch_size < 1 or self.epochs < 1:
            raise ValueError("patience, batch_size and epochs must be >= 1")


@dataclass
class TrainReport:
    train_loss: list[float] = field(default_factory=list)
    train_accuracy: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)
    stopped_epoch: int = 0
    best_epoch: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


class EarlyStopping:
    """Stop after ``patience`` consecutive epochs without strict improvement."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = -np.inf
        self.best_epoch = 0
        self.wait = 0

    def update(self, epoch: int, score: float) -> tuple[bool, bool]:
        """Record one epoch; returns (improved, should_stop)."""
        if score > self.best:
            self.best, self.best_epoch, self.wait = score, epoch, 0
            return True, False
        self.wait += 1
        return False, self.wait >= self.patience


def early_stopping_trace(scores, patience: int) -> tuple[int, int]:
    """(stopped_epoch, best_epoch) for a scripted validation curve, 1-based."""
    stopper = EarlyStopping(patience)
    epoch = 0
    for epoch, score in enumerate(scores, start=1):
        _, stop = stopper.update(epoch, score)
        if stop:
            break
    return epoch, stopper.best_epoch


def evaluate(net: Network, x, y, batch_size: int = 64, transform=None) -> tuple[float, float]:
    """(mean loss, accuracy) in inference mode."""
    probs = net.predict_proba(x, batch_size, transform)
    y = np.asarray(y)
    picked = probs[np.arange(len(y)), y].astype(np.float64)
    loss = float(-np.mean(np.log(np.maximum(picked, 1e-12))))
    return loss, float(np.mean(probs.argmax(axis=1) == y))


def train(net: Network, train_x, train_y, val_x, val_y, cfg: TrainConfig,
          transform=None) -> TrainReport:
    """Fit ``net`` in place and restore the weights of the best validation epoch.

    ``transform`` maps each raw batch to network input (e.g. uint8 images to
    floats), so large datasets can stay compact in memory.
    """
    transform = transform or (lambda b: b)
    train_x, train_y = np.asarray(train_x), np.asarray(train_y)
    val_x, val_y = np.asarray(val_x), np.asarray(val_y)
    if len(train_x) == 0 or len(val_x) == 0:
        raise EmptySplit("training and validation sets must be non-empty")
    rng = np.random.default_rng(cfg.seed)
    opt = make_optimizer(cfg.optimizer, cfg.learning_rate)
    stopper = EarlyStopping(cfg.patience)
    report = TrainReport()
    best_weights = net.get_weights()
    params = net.parameters()
    eval_batch = max(cfg.batch_size, 16)

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(train_x))
        losses, hits = [], 0
        for s in range(0, len(order), cfg.batch_size):
            idx = order[s : s + cfg.batch_size]
            loss, probs = net.loss_and_grad(transform(train_x[idx]), train_y[idx], rng)
            opt.step(params, net.gradients())
            losses.append(loss * len(idx))
            hits += int(np.sum(probs.argmax(axis=1) == train_y[idx]))
        report.train_loss.append(float(sum(losses) / len(order)))
        report.train_accuracy.append(hits / len(order))
        vloss, vacc = evaluate(net, val_x, val_y, eval_batch, transform)
        report.val_loss.append(vloss)
        report.val_accuracy.append(vacc)
        log.info("epoch %d loss %.4f acc %.4f val_loss %.4f val_acc %.4f", epoch,
                 report.train_loss[-1], report.train_accuracy[-1], vloss, vacc)
        improved, stop = stopper.update(epoch, vacc)
        if improved:
            best_weights = net.get_weights()
        report.stopped_epoch = epoch
        if stop:
            break

    report.best_epoch = stopper.best_epoch
    net.set_weights(best_weights)
    return report
