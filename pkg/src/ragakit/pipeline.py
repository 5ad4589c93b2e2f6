"""End-to-end experiment stages shared by the CLI and the experiment scripts.

Directory layout under an experiment root::

    audio/<raga>/<clip>.wav          synthetic or user-provided recordings
    features.csv, features.splits.json
    images/<split>/<raga>/<id>.png, images/splits.json
    runs/<model>/weights.rglb, train_report.json, meta.json, confusion.csv
    report.json, report.txt
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import models
from .audio_io import AudioClip, load_audio, resample, save_audio, segment
from .dataset import (
    RAGA_SYMBOLS, RAGAS, SplitDataset, build_feature_table, build_image_tree, image_path,
    manifest_path, read_feature_csv, synth_raga_corpus,
)
from .errors import DataError, EmptyInput, IoFailure, LabelMismatch, NumericError
from .evaluation import ConfusionMatrix, SAME_SWARA_PAIRS, compare_report, confusion
from .nn import load_weights, save_weights, train
from .render import image_to_input, load_png

log = logging.getLogger(__name__)

FEATURE_MODELS = ("cnn1d", "lstm", "ann")
IMAGE_MODELS = ("cnn2d",)
SEGMENT_SECONDS = 5.0


@dataclass
class ExperimentManifest:
    """Everything that determines an experiment's outputs."""

    out: str = "experiment"
    source: str = "synthetic"  # or a directory of <raga>/<clip>.wav
    seed: int = 0
    models: list[str] = field(default_factory=lambda: list(models.MODEL_NAMES))
    per_class: int = 60
    clip_seconds: float = SEGMENT_SECONDS
    group_by_recording: bool = False
    overrides: dict[str, dict] = field(default_factory=dict)

    def __post_init__(self):
        bad = [m for m in self.models if m not in models.MODEL_NAMES]
        if bad:
            raise models.UnknownModel(f"unknown model(s) {bad}; choose from {models.MODEL_NAMES}")
        if self.seed is None:
            raise ValueError("manifest needs an explicit seed")
        for name, over in self.overrides.items():
            if name not in models.MODEL_NAMES:
                raise models.UnknownModel(f"override for unknown model {name!r}")
            try:
                replace(models.build(name).train_defaults, **over)
            except TypeError as exc:
                raise DataError(f"bad override for {name}: {exc}") from exc

    @classmethod
    def load(cls, path) -> "ExperimentManifest":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise IoFailure(f"cannot read manifest {path}: {exc}") from exc
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise DataError(f"unknown manifest keys {sorted(unknown)}")
        return cls(**data)

    def train_config(self, model: str):
        cfg = models.build(model).train_defaults
        return replace(cfg, seed=self.seed, **self.overrides.get(model, {}))


# ---- audio ---------------------------------------------------------------

def write_synthetic_audio(root, per_class: int, seed: int, seconds: float = SEGMENT_SECONDS) -> list[Path]:
    root = Path(root)
    paths = []
    for clip, label in synth_raga_corpus(RAGAS, per_class, seconds, seed):
        path = root / label / f"{clip.source_id}.wav"
        path.parent.mkdir(parents=True, exist_ok=True)
        save_audio(path, clip)
        paths.append(path)
    return paths


def load_audio_dir(root) -> tuple[list[AudioClip], list[str]]:
    """All ``<raga>/<clip>.wav`` under ``root`` at the analysis rate, sorted."""
    root = Path(root)
    files = sorted(root.glob("*/*.wav"))
    if not files:
        raise EmptyInput(f"no <label>/<clip>.wav files under {root}")
    clips, labels = [], []
    for f in files:
        clip = load_audio(f)
        clips.append(resample(AudioClip(clip.samples, clip.sample_rate, f.stem)))
        labels.append(f.parent.name)
    return clips, labels


def segment_all(clips, labels, seconds: float = SEGMENT_SECONDS):
    segs, seg_labels = [], []
    for clip, label in zip(clips, labels):
        try:
            parts = segment(clip, seconds)
        except EmptyInput:
            log.warning("skipping %s: shorter than %.1f s", clip.source_id, seconds)
            continue
        segs += parts
        seg_labels += [label] * len(parts)
    ids = [s.source_id for s in segs]
    if len(set(ids)) != len(ids):
        raise DataError("segment ids are not unique; clip file names must differ across labels")
    if not segs:
        raise EmptyInput("no clip is long enough for one segment")
    return segs, seg_labels


def extract_features(audio_dir, csv_path, seed: int, group_by_recording: bool = False) -> SplitDataset:
    segs, labels = segment_all(*load_audio_dir(audio_dir))
    Path(csv_path).parent.mkdir(parents=True, exist_ok=True)
    return build_feature_table(segs, labels, csv_path, seed, group_by_recording)


def render_images(audio_dir, image_root, seed: int, group_by_recording: bool = False) -> SplitDataset:
    segs, labels = segment_all(*load_audio_dir(audio_dir))
    return build_image_tree(segs, labels, image_root, seed, group_by_recording)


# ---- data loading for training --------------------------------------------

@dataclass
class Arrays:
    x: dict[str, np.ndarray]
    y: dict[str, np.ndarray]
    labels: list[str]


def class_order(labels) -> list[str]:
    """Known ragas in table order, anything else appended alphabetically."""
    present = set(labels)
    known = [s for s in RAGA_SYMBOLS if s in present]
    return known + sorted(present - set(known))


def _split_arrays(ds: SplitDataset, rows, classes) -> Arrays:
    idx = {c: i for i, c in enumerate(classes)}
    xs, ys = {}, {}
    for split in ("train", "val", "test"):
        sel = ds.indices(split)
        xs[split] = rows[sel] if len(sel) else rows[:0]
        ys[split] = np.array([idx[ds.labels[i]] for i in sel], dtype=np.int64)
    return Arrays(xs, ys, classes)


def load_feature_arrays(csv_path, classes=None) -> Arrays:
    x, labels = read_feature_csv(csv_path)
    if not np.isfinite(x).all():
        bad = sorted({int(i) for i in np.argwhere(~np.isfinite(x))[:, 0]})
        raise NumericError(f"{csv_path}: non-finite feature values in rows {bad[:10]}")
    ds = SplitDataset.load_manifest(manifest_path(csv_path))
    if labels != ds.labels:
        raise LabelMismatch(f"{csv_path} rows disagree with its split manifest")
    return _split_arrays(ds, x, classes or class_order(labels))


def load_image_arrays(root, classes=None) -> Arrays:
    """Images stay uint8 here; ``image_batch`` scales them per batch."""
    ds = SplitDataset.load_manifest(manifest_path(root))
    imgs = np.stack([
        load_png(image_path(root, ds.assignment[sid], lab, sid))
        for sid, lab in zip(ds.ids, ds.labels)
    ])
    return _split_arrays(ds, imgs, classes or class_order(ds.labels))


def image_batch(batch: np.ndarray) -> np.ndarray:
    return image_to_input(batch)


class Standardizer:
    """Per-column z-score fitted on the training split."""

    def __init__(self, mean, std):
        self.mean = np.asarray(mean, dtype=np.float64)
        self.std = np.asarray(std, dtype=np.float64)

    @classmethod
    def fit(cls, x) -> "Standardizer":
        std = x.std(axis=0)
        return cls(x.mean(axis=0), np.where(std > 0, std, 1.0))

    def __call__(self, x) -> np.ndarray:
        return ((x - self.mean) / self.std).astype(np.float32)

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}


# ---- train / eval ---------------------------------------------------------

def train_model(model: str, data_path, run_dir, cfg) -> dict:
    """Train one model, save weights, report and metadata under ``run_dir``."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    spec = models.build(model)
    if model in IMAGE_MODELS:
        data = load_image_arrays(data_path)
        transform = image_batch
        meta_extra = {}
    else:
        data = load_feature_arrays(data_path)
        scaler = Standardizer.fit(data.x["train"])
        data.x = {k: scaler(v).reshape((-1,) + spec.input_shape) for k, v in data.x.items()}
        transform = None
        meta_extra = {"standardizer": scaler.to_dict()}
    spec = models.build(model, n_classes=len(data.labels))
    net = spec.network(seed=cfg.seed)
    t0 = time.perf_counter()
    report = train(net, data.x["train"], data.y["train"], data.x["val"], data.y["val"], cfg, transform)
    elapsed = time.perf_counter() - t0
    save_weights(run_dir / "weights.rglb", net)
    (run_dir / "train_report.json").write_text(json.dumps(report.to_dict(), indent=1))
    meta = {"model": model, "data": str(data_path), "labels": data.labels,
            "train_config": asdict(cfg), **meta_extra}
    (run_dir / "meta.json").write_text(json.dumps(meta, indent=1))
    (run_dir / "timing.json").write_text(json.dumps({"train_seconds": elapsed}))
    log.info("%s: best epoch %d of %d, %.1f s", model, report.best_epoch, report.stopped_epoch, elapsed)
    return meta


def evaluate_model(run_dir, data_path=None, split: str = "test", out_csv=None) -> ConfusionMatrix:
    run_dir = Path(run_dir)
    try:
        meta = json.loads((run_dir / "meta.json").read_text())
    except OSError as exc:
        raise IoFailure(f"{run_dir} is not a training run: {exc}") from exc
    model, labels = meta["model"], meta["labels"]
    data_path = data_path or meta["data"]
    spec = models.build(model, n_classes=len(labels))
    net = spec.network(seed=0)
    load_weights(run_dir / "weights.rglb", net)
    if model in IMAGE_MODELS:
        data = load_image_arrays(data_path, labels)
        x, transform = data.x[split], image_batch
    else:
        data = load_feature_arrays(data_path, labels)
        st = meta["standardizer"]
        x = Standardizer(st["mean"], st["std"])(data.x[split]).reshape((-1,) + spec.input_shape)
        transform = None
    if len(x) == 0:
        raise EmptyInput(f"the {split} split is empty")
    preds = net.predict(x, batch_size=16 if model in IMAGE_MODELS else 64, transform=transform)
    cm = confusion(preds, data.y[split], labels)
    cm.save(out_csv or run_dir / "confusion.csv")
    return cm


def compare_runs(named_matrices: dict[str, ConfusionMatrix], out_dir=None, pairs=SAME_SWARA_PAIRS):
    present = set(next(iter(named_matrices.values())).labels) if named_matrices else set()
    pairs = [p for p in pairs if set(p) <= present]
    report = compare_report(list(named_matrices.items()), pairs)
    if out_dir is not None:
        Path(out_dir, "report.json").write_text(report.to_json())
        Path(out_dir, "report.txt").write_text(report.to_text() + "\n")
    return report


def run_experiment(m: ExperimentManifest):
    """synth (or ingest) -> extract + render -> train -> eval -> compare."""
    out = Path(m.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(json.dumps(asdict(m), indent=1))
    timings = {}
    t0 = time.perf_counter()
    if m.source == "synthetic":
        audio_dir = out / "audio"
        write_synthetic_audio(audio_dir, m.per_class, m.seed, m.clip_seconds)
    else:
        audio_dir = Path(m.source)
    timings["audio"] = time.perf_counter() - t0

    csv_path, image_root = out / "features.csv", out / "images"
    if any(name in FEATURE_MODELS for name in m.models):
        t = time.perf_counter()
        extract_features(audio_dir, csv_path, m.seed, m.group_by_recording)
        timings["extract"] = time.perf_counter() - t
    if any(name in IMAGE_MODELS for name in m.models):
        t = time.perf_counter()
        render_images(audio_dir, image_root, m.seed, m.group_by_recording)
        timings["render"] = time.perf_counter() - t

    matrices = {}
    for name in m.models:
        t = time.perf_counter()
        run_dir = out / "runs" / name
        data_path = image_root if name in IMAGE_MODELS else csv_path
        train_model(name, data_path, run_dir, m.train_config(name))
        matrices[name] = evaluate_model(run_dir)
        timings[name] = time.perf_counter() - t
    report = compare_runs(matrices, out)
    timings["total"] = time.perf_counter() - t0
    (out / "timing.json").write_text(json.dumps(timings, indent=1))
    return report, matrices, timings
