"""Confusion matrices, accuracy and same-swara pair misclassification.

Matrices are stored rows = predicted class, columns = true class.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    ClassOutOfRange, EmptyMatrix, InvalidPair, LabelMismatch, LengthMismatch,
)

ORIENTATION = "rows=predicted,columns=true"
# ragas sharing one swara set
SAME_SWARA_PAIRS = (("At", "Beg"), ("At", "Bi"), ("Beg", "Bi"), ("Har", "Kam"))


@dataclass
class ConfusionMatrix:
    counts: np.ndarray
    labels: list[str]
    orientation: str = ORIENTATION

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        self.labels = [str(l) for l in self.labels]
        k = len(self.labels)
        if self.counts.shape != (k, k):
            raise LengthMismatch(f"counts {self.counts.shape} vs {k} labels")
        if (self.counts < 0).any():
            raise ValueError("counts must be non-negative")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def index(self, label) -> int:
        if isinstance(label, (int, np.integer)):
            if not 0 <= label < len(self.labels):
                raise InvalidPair(f"class index {label} out of range")
            return int(label)
        try:
            return self.labels.index(str(label))
        except ValueError:
            raise InvalidPair(f"unknown class {label!r}") from None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["predicted\\true", *self.labels])
        for label, row in zip(self.labels, self.counts):
            w.writerow([label, *row.tolist()])
        return buf.getvalue()

    def save(self, path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "ConfusionMatrix":
        rows = [r for r in csv.reader(io.StringIO(text)) if r]
        labels = rows[0][1:]
        if [r[0] for r in rows[1:]] != labels:
            raise LabelMismatch("row and column labels differ")
        return cls(np.array([[int(v) for v in r[1:]] for r in rows[1:]]), labels)

    @classmethod
    def load(cls, path) -> "ConfusionMatrix":
        return cls.from_csv(Path(path).read_text())


@dataclass
class PairMatrix:
    """2x2 cells of a parent matrix at classes (a, b): [[aa, ab], [ba, bb]]."""

    counts: np.ndarray
    labels: tuple[str, str]

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != (2, 2):
            raise ValueError("pair matrix must be 2x2")

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion(preds, truths, labels) -> ConfusionMatrix:
    """Count matrix for predictions vs. ground truth.

    ``labels`` is either the class count K or the ordered class names.
    """
    names = [str(i) for i in range(labels)] if isinstance(labels, int) else list(labels)
    k = len(names)
    preds, truths = np.asarray(preds, dtype=np.int64), np.asarray(truths, dtype=np.int64)
    if preds.shape != truths.shape:
        raise LengthMismatch(f"{preds.size} predictions vs {truths.size} truths")
    if preds.size and (min(preds.min(), truths.min()) < 0 or max(preds.max(), truths.max()) >= k):
        raise ClassOutOfRange(f"classes must lie in [0, {k})")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (preds, truths), 1)
    return ConfusionMatrix(counts, names)


def accuracy(cm) -> float:
    """Correct predictions over all predictions (trace / total)."""
    counts = np.asarray(getattr(cm, "counts", cm))
    total = counts.sum()
    if total == 0:
        raise EmptyMatrix("no samples in confusion matrix")
    return float(np.trace(counts) / total)


def pair_submatrix(cm: ConfusionMatrix, a, b) -> PairMatrix:
    i, j = cm.index(a), cm.index(b)
    if i == j:
        raise InvalidPair("pair classes must differ")
    idx = [i, j]
    return PairMatrix(cm.counts[np.ix_(idx, idx)], (cm.labels[i], cm.labels[j]))


def misclassification_rate(pm) -> float:
    """Off-diagonal share of a 2x2 pair matrix."""
    counts = np.asarray(getattr(pm, "counts", pm))
    total = counts.sum()
    if total == 0:
        raise EmptyMatrix("empty pair matrix")
    return float((total - np.trace(counts)) / total)


@dataclass
class RunResult:
    model: str
    accuracy: float | None
    pairs: dict[tuple[str, str], float | None]  # None: no items of either class


@dataclass
class Report:
    runs: list[RunResult]
    best_overall: list[str]
    best_per_pair: dict[str, list[str]]

    def to_dict(self) -> dict:
        return {
            "runs": [
                {
                    "model": r.model,
                    "accuracy": r.accuracy,
                    "pairs": [{"a": a, "b": b, "rate": rate} for (a, b), rate in r.pairs.items()],
                }
                for r in self.runs
            ],
            "best_overall": self.best_overall,
            "best_per_pair": self.best_per_pair,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        pair_keys = list(self.best_per_pair)
        header = f"{'model':<10}{'accuracy':>10}" + "".join(f"{k:>11}" for k in pair_keys)
        lines = [header, "-" * len(header)]
        for r in self.runs:
            acc = "n/a" if r.accuracy is None else f"{100 * r.accuracy:.2f}%"
            cells = []
            for key in pair_keys:
                rate = r.pairs.get(tuple(key.split("/")))
                cells.append(f"{'n/a' if rate is None else f'{100 * rate:.2f}%':>11}")
            lines.append(f"{r.model:<10}{acc:>10}" + "".join(cells))
        if self.best_overall:
            lines.append(f"best accuracy: {', '.join(self.best_overall)}")
        for key, models in self.best_per_pair.items():
            lines.append(f"lowest misclassification {key}: {', '.join(models)}")
        return "\n".join(lines)


def _ties(scores: dict[str, float], best) -> list[str]:
    if not scores:
        return []
    target = best(scores.values())
    return [m for m, s in scores.items() if np.isclose(s, target, rtol=0, atol=1e-12)]


def _report(results: list[RunResult], pairs) -> Report:
    accs = {r.model: r.accuracy for r in results if r.accuracy is not None}
    best_pair = {}
    for a, b in pairs:
        rates = {r.model: r.pairs[(a, b)] for r in results if r.pairs.get((a, b)) is not None}
        best_pair[f"{a}/{b}"] = _ties(rates, min)
    return Report(results, _ties(accs, max), best_pair)


def _rate_or_none(pm) -> float | None:
    return misclassification_rate(pm) if pm.total else None


def compare_report(runs, pairs=SAME_SWARA_PAIRS) -> Report:
    """Accuracy and per-pair misclassification for full-matrix runs.

    ``runs`` is a list of (model name, ConfusionMatrix); all matrices must
    share class labels.
    """
    runs = list(runs)
    if runs:
        ref = runs[0][1].labels
        for name, cm in runs:
            if cm.labels != ref:
                raise LabelMismatch(f"{name}: class labels differ from {runs[0][0]}")
    results = [
        RunResult(name, accuracy(cm),
                  {(a, b): _rate_or_none(pair_submatrix(cm, a, b)) for a, b in pairs})
        for name, cm in runs
    ]
    return _report(results, pairs)


def compare_pair_tables(tables: dict[str, dict[tuple[str, str], PairMatrix]],
                        accuracies: dict[str, float] | None = None,
                        pairs=SAME_SWARA_PAIRS) -> Report:
    """Same report from stand-alone pair matrices (no parent matrix available)."""
    accuracies = accuracies or {}
    results = [
        RunResult(model, accuracies.get(model),
                  {key: _rate_or_none(pm) for key, pm in per_pair.items()})
        for model, per_pair in tables.items()
    ]
    return _report(results, pairs)
