"""Raga scales, a synthetic corpus, stratified 8:1:1 splits and the two
dataset layouts (feature CSV, PNG tree)."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_flow

from .audio_io import ANALYSIS_RATE, AudioClip
from .errors import EmptyInput, IoFailure
from .features import FEATURE_NAMES, extract_feature_vector

log = logging.getLogger(__name__)

TONIC_HZ = 261.63
SPLITS = ("train", "val", "test")
SPLIT_RATIO = (0.8, 0.1, 0.1)


@dataclass(frozen=True)
class RagaScale:
    """Pitch-class set plus ascending/descending note-order hints.

    Hints are semitone offsets from the tonic; 12 is the upper tonic.
    """

    symbol: str
    name: str
    pitch_classes: tuple[int, ...]
    ascent: tuple[int, ...]
    descent: tuple[int, ...]
    nyasa: tuple[int, ...] = (0, 7)

    def __post_init__(self):
        pcs = set(self.pitch_classes)
        if 0 not in pcs or not all(0 <= p < 12 for p in pcs):
            raise ValueError(f"{self.symbol}: pitch classes must include 0 and lie in [0, 12)")
        for hint in (self.ascent, self.descent):
            if not {p % 12 for p in hint} <= pcs:
                raise ValueError(f"{self.symbol}: hint uses notes outside the scale")
        if not set(self.nyasa) <= set(self.ascent) | set(self.descent):
            raise ValueError(f"{self.symbol}: resting note not on the hints")


# Swara sets (S R1 R2 G1 G2 M1 M2 P D1 D2 N1 N2 -> C .. B). Hint values are
# semitones above C4, so 12 is the upper tonic and 14 the upper Ri. Each
# raga dwells in its own register band, which lets clip-averaged descriptors
# tell apart ragas sharing a swara set. Bands start at C4: lower down a
# semitone is narrower than the STFT main lobe and chroma smears across
# classes. The top band keeps the third harmonic below Nyquist.
RAGAS = (
    RagaScale("At", "Atana", (0, 2, 4, 5, 7, 9, 11),
              (29, 31, 35, 36, 38, 40, 41), (41, 40, 38, 36, 35, 33, 31, 33, 29), (36, 38)),
    RagaScale("Beg", "Begada", (0, 2, 4, 5, 7, 9, 11),
              (12, 16, 14, 16, 17, 19, 21, 19, 24), (24, 23, 21, 19, 17, 16, 14, 12), (16, 21)),
    RagaScale("Beh", "Behag", (0, 2, 4, 5, 6, 7, 9, 11),
              (26, 28, 29, 31, 35, 36), (36, 35, 33, 31, 30, 28, 29, 28, 26), (28, 35)),
    RagaScale("Bh", "Bhairavi", (0, 2, 3, 5, 7, 8, 9, 10),
              (10, 12, 14, 15, 17, 19, 21, 22), (22, 20, 19, 17, 15, 14, 12, 10), (15, 19)),
    RagaScale("Bi", "Bilahari", (0, 2, 4, 5, 7, 9, 11),
              (7, 9, 12, 14, 16, 19), (19, 17, 16, 14, 12, 11, 9, 7), (12, 16)),
    RagaScale("Dh", "Dhanyasi", (0, 1, 3, 5, 7, 8, 10),
              (15, 17, 19, 22, 24, 27), (27, 25, 24, 22, 20, 19, 17, 15), (15, 22)),
    RagaScale("Har", "Harikambhoji", (0, 2, 4, 5, 7, 9, 10),
              (19, 21, 22, 24, 26, 28, 29, 31), (31, 29, 28, 26, 24, 22, 21, 19), (24, 28)),
    RagaScale("Hu", "Husseni", (0, 2, 3, 5, 7, 8, 9, 10),
              (22, 24, 26, 27, 29, 31, 33, 31, 34), (34, 33, 32, 31, 29, 27, 26, 24, 22), (26, 33)),
    RagaScale("Kal", "Kalyani", (0, 2, 4, 6, 7, 9, 11),
              (4, 6, 7, 9, 11, 12, 14, 16), (16, 14, 12, 11, 9, 7, 6, 4), (7, 11)),
    RagaScale("Kam", "Kamas", (0, 2, 4, 5, 7, 9, 10),
              (0, 5, 4, 5, 7, 9, 10), (10, 9, 7, 5, 4, 2, 0), (5, 9)),
)
RAGA_SYMBOLS = tuple(r.symbol for r in RAGAS)
RAGA_BY_SYMBOL = {r.symbol: r for r in RAGAS}

STEP_PROBABILITY = 0.7
NOTE_SECONDS = (0.2, 0.5)
NYASA_SECONDS = (0.4, 0.5)  # resting notes are held at the long end
HARMONIC_GAINS = (1.0, 0.5, 0.25)  # fundamental, -6 dB, -12 dB
VIBRATO_CENTS = 30.0
VIBRATO_HZ = (4.5, 6.5)
VIBRATO_PROBABILITY = 0.5


def note_walk(scale: RagaScale, n_notes: int, rng: np.random.Generator) -> list[int]:
    """Random walk over the ascent/descent hints.

    Each move advances one position along the current hint with probability
    ``STEP_PROBABILITY`` and skips one note otherwise. Running off the end
    of a hint continues on the other one, so phrases rise and fall in turn.
    """
    hints = (scale.ascent, scale.descent)
    direction = int(rng.integers(2))
    pos = int(rng.integers(len(hints[direction]) - 1))
    notes = []
    for _ in range(n_notes):
        notes.append(hints[direction][pos])
        pos += 1 if rng.random() < STEP_PROBABILITY else 2
        # the last note of a hint is the first of the other one
        if pos >= len(hints[direction]) - 1:
            pos -= len(hints[direction]) - 1
            direction = 1 - direction
    return notes


def _envelope(n: int, sr: int) -> np.ndarray:
    env = np.ones(n)
    attack = min(n // 4, int(0.02 * sr))
    release = min(n // 3, int(0.06 * sr))
    if attack:
        env[:attack] = 0.5 - 0.5 * np.cos(np.pi * np.arange(attack) / attack)
    if release:
        env[n - release :] *= 0.5 + 0.5 * np.cos(np.pi * np.arange(release) / release)
    return env


def synth_clip(scale: RagaScale, seconds: float, rng: np.random.Generator,
               sample_rate: int = ANALYSIS_RATE) -> np.ndarray:
    total = int(round(seconds * sample_rate))
    notes = note_walk(scale, int(seconds / NOTE_SECONDS[0]) + 1, rng)
    durations = []
    for note in notes:
        lo, hi = NYASA_SECONDS if note in scale.nyasa else (NOTE_SECONDS[0], NYASA_SECONDS[0])
        durations.append(int(rng.uniform(lo, hi) * sample_rate))
        if sum(durations) >= total:
            break
    notes = notes[: len(durations)]
    pos = 0
    phase = np.zeros(len(HARMONIC_GAINS))
    out = np.zeros(sum(durations))
    for note, n in zip(notes, durations):
        f0 = TONIC_HZ * 2.0 ** (note / 12)
        t = np.arange(n) / sample_rate
        if rng.random() < VIBRATO_PROBABILITY:
            rate = rng.uniform(*VIBRATO_HZ)
            cents = VIBRATO_CENTS * np.sin(2 * np.pi * rate * t)
            inst = f0 * 2.0 ** (cents / 1200)
        else:
            inst = np.full(n, f0)
        cycles = np.cumsum(inst) / sample_rate
        tone = np.zeros(n)
        for h, gain in enumerate(HARMONIC_GAINS):
            tone += gain * np.sin(2 * np.pi * (h + 1) * cycles + phase[h])
            phase[h] += 2 * np.pi * (h + 1) * cycles[-1]
        out[pos : pos + n] = tone * _envelope(n, sample_rate)
        pos += n
    out = out[:total]
    peak = np.abs(out).max()
    return out * (rng.uniform(0.5, 0.9) / peak) if peak > 0 else out


def synth_raga_corpus(scales=RAGAS, per_class: int = 12, seconds: float = 5.0,
                      seed: int = 0, sample_rate: int = ANALYSIS_RATE) -> list[tuple[AudioClip, str]]:
    """Class-balanced labelled clips; clip i of a class depends only on (seed, class, i)."""
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    corpus = []
    for ci, scale in enumerate(scales):
        for i in range(per_class):
            rng = np.random.default_rng([seed, ci, i])
            samples = synth_clip(scale, seconds, rng, sample_rate)
            corpus.append((AudioClip(samples, sample_rate, f"{scale.symbol}_{i:03d}"), scale.symbol))
    return corpus


def recording_of(segment_id: str) -> str:
    return segment_id.rsplit("_seg", 1)[0]


@dataclass
class SplitDataset:
    ids: list[str]
    labels: list[str]
    assignment: dict[str, str]
    split_seed: int
    group_by_recording: bool = False
    items: list = field(default_factory=list)

    def indices(self, split: str) -> list[int]:
        return [i for i, sid in enumerate(self.ids) if self.assignment[sid] == split]

    def members(self, split: str) -> list[str]:
        return [self.ids[i] for i in self.indices(split)]

    def sizes(self) -> dict[str, int]:
        return {s: len(self.indices(s)) for s in SPLITS}

    def manifest(self) -> dict:
        return {
            "split_seed": self.split_seed,
            "group_by_recording": self.group_by_recording,
            "ids": self.ids,
            "labels": self.labels,
            "splits": {s: self.members(s) for s in SPLITS},
        }

    def save_manifest(self, path) -> None:
        Path(path).write_text(json.dumps(self.manifest(), indent=1))

    @classmethod
    def load_manifest(cls, path) -> "SplitDataset":
        m = json.loads(Path(path).read_text())
        assignment = {sid: s for s, ids in m["splits"].items() for sid in ids}
        return cls(m["ids"], m["labels"], assignment, m["split_seed"], m["group_by_recording"])


def _apportion(class_sizes: dict[str, int], rng) -> dict[str, list[int]]:
    """Per-class (train, val, test) counts hitting the global 8:1:1 targets
    exactly, with every class represented in train.

    Each class starts from the floor of its share. Leftover items are placed
    by an integral max-flow (class -> split -> global target) in which a
    cell may take one extra item only when its share is fractional, so every
    cell ends at the floor or ceiling of its share.
    """
    total = sum(class_sizes.values())
    targets = [round(SPLIT_RATIO[0] * total), round(SPLIT_RATIO[1] * total)]
    targets.append(total - sum(targets))
    order = list(class_sizes)
    rng.shuffle(order)
    alloc = {}
    for c in order:
        n = class_sizes[c]
        alloc[c] = [int(np.floor(r * n)) for r in SPLIT_RATIO]
        if alloc[c][0] == 0 and n > 0:
            alloc[c][0] = 1
    given = [sum(a[k] for a in alloc.values()) for k in range(3)]

    n_cls = len(order)
    sink = n_cls + 4
    cap = np.zeros((sink + 1, sink + 1), dtype=np.int32)
    for i, c in enumerate(order):
        cap[0, 1 + i] = class_sizes[c] - sum(alloc[c])
        for k, r in enumerate(SPLIT_RATIO):
            if r * class_sizes[c] - alloc[c][k] > 1e-9:
                cap[1 + i, 1 + n_cls + k] = 1
    for k in range(3):
        cap[1 + n_cls + k, sink] = max(targets[k] - given[k], 0)
    flow = maximum_flow(csr_matrix(cap), 0, sink).flow.toarray()
    for i, c in enumerate(order):
        for k in range(3):
            extra = int(flow[1 + i, 1 + n_cls + k])
            alloc[c][k] += extra
            given[k] += extra
    # only reachable when the train minimum forces a class over its share
    for c in order:
        while sum(alloc[c]) < class_sizes[c]:
            k = int(np.argmax([targets[j] - given[j] for j in range(3)]))
            alloc[c][k] += 1
            given[k] += 1
    return alloc


def stratified_split(ids, labels, seed: int, group_by_recording: bool = False) -> dict[str, str]:
    """Map each id to train/val/test, stratified by label, seeded.

    With ``group_by_recording`` all segments of one recording share a split.
    """
    ids, labels = list(ids), list(labels)
    if not ids:
        raise EmptyInput("nothing to split")
    units: dict[str, list[str]] = {}
    unit_label: dict[str, str] = {}
    for sid, lab in zip(ids, labels):
        key = recording_of(sid) if group_by_recording else sid
        units.setdefault(key, []).append(sid)
        unit_label[key] = lab
    by_class: dict[str, list[str]] = {}
    for key in units:
        by_class.setdefault(unit_label[key], []).append(key)
    rng = np.random.default_rng(seed)
    classes = sorted(by_class)
    alloc = _apportion({c: len(by_class[c]) for c in classes}, rng)
    assignment = {}
    for c in classes:
        keys = sorted(by_class[c])
        perm = rng.permutation(len(keys))
        n_train, n_val, _ = alloc[c]
        for rank, idx in enumerate(perm):
            split = "train" if rank < n_train else "val" if rank < n_train + n_val else "test"
            for sid in units[keys[idx]]:
                assignment[sid] = split
    return assignment


def build_feature_table(segments, labels, csv_path=None, seed: int = 0,
                        group_by_recording: bool = False) -> SplitDataset:
    """One 30-feature row per segment, plus the split assignment.

    Writes ``csv_path`` (31 columns, label last) and a sibling
    ``<stem>.splits.json`` manifest when a path is given.
    """
    segments, labels = list(segments), list(labels)
    if not segments:
        raise EmptyInput("no segments")
    rows = [extract_feature_vector(s) for s in segments]
    ids = [s.source_id for s in segments]
    ds = SplitDataset(ids, labels, stratified_split(ids, labels, seed, group_by_recording),
                      seed, group_by_recording, rows)
    if csv_path is not None:
        write_feature_csv(csv_path, rows, labels)
        ds.save_manifest(manifest_path(csv_path))
    return ds


def manifest_path(path) -> Path:
    path = Path(path)
    if path.suffix == ".csv":
        return path.with_suffix(".splits.json")
    return path / "splits.json"


def write_feature_csv(path, rows, labels) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*FEATURE_NAMES, "label"])
        for row, lab in zip(rows, labels):
            w.writerow([repr(float(v)) for v in row] + [lab])


def read_feature_csv(path) -> tuple[np.ndarray, list[str]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != [*FEATURE_NAMES, "label"]:
            raise IoFailure(f"{path}: unexpected header")
        rows = list(reader)
    x = np.array([[float(v) for v in r[:-1]] for r in rows], dtype=np.float64).reshape(-1, len(FEATURE_NAMES))
    return x, [r[-1] for r in rows]


def image_path(root, split: str, label: str, segment_id: str) -> Path:
    return Path(root) / split / label / f"{segment_id}.png"


def build_image_tree(segments, labels, root, seed: int = 0,
                     group_by_recording: bool = False) -> SplitDataset:
    """Render every segment to ``<root>/<split>/<raga>/<id>.png``."""
    from .render import render_clip, save_png

    segments, labels = list(segments), list(labels)
    if not segments:
        raise EmptyInput("no segments")
    ids = [s.source_id for s in segments]
    assignment = stratified_split(ids, labels, seed, group_by_recording)
    paths = []
    try:
        for seg, lab in zip(segments, labels):
            path = image_path(root, assignment[seg.source_id], lab, seg.source_id)
            save_png(path, render_clip(seg))
            paths.append(str(path))
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    ds = SplitDataset(ids, labels, assignment, seed, group_by_recording, paths)
    ds.save_manifest(manifest_path(root))
    return ds
