import json
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ragakit.audio_io import AudioClip, segment
from ragakit.dataset import (
    NOTE_SECONDS, NYASA_SECONDS, RAGAS, RAGA_BY_SYMBOL, RagaScale, SplitDataset, build_feature_table,
    build_image_tree, manifest_path, note_walk, read_feature_csv, recording_of, stratified_split,
    synth_clip, synth_raga_corpus,
)
from ragakit.errors import EmptyInput, IoFailure
from ragakit.features import FEATURE_NAMES, chroma_stft, extract_feature_vector
from ragakit.render import load_png

SR = 22050


# ---- splits -----------------------------------------------------------------

def test_single_class_of_100_splits_80_10_10():
    ids = [f"x{i}" for i in range(100)]
    a = stratified_split(ids, ["A"] * 100, seed=0)
    assert Counter(a.values()) == {"train": 80, "val": 10, "test": 10}


@given(st.lists(st.integers(1, 40), min_size=1, max_size=10), st.integers(0, 1000))
def test_split_sizes_and_stratification(class_sizes, seed):
    ids, labels = [], []
    for c, n in enumerate(class_sizes):
        ids += [f"c{c}_{i}" for i in range(n)]
        labels += [f"c{c}"] * n
    a = stratified_split(ids, labels, seed)
    total = len(ids)
    counts = Counter(a.values())
    assert counts["train"] == round(0.8 * total) and counts["val"] == round(0.1 * total)
    assert sum(counts.values()) == total
    for c, n in enumerate(class_sizes):
        per = Counter(a[f"c{c}_{i}"] for i in range(n))
        assert per["train"] >= 1
        # each class stays within one item of its proportional share
        for split, r in (("train", .8), ("val", .1), ("test", .1)):
            assert abs(per[split] - r * n) < 1 + 1e-9 or split == "train" and n * .8 < 1


def test_split_is_seeded():
    ids = [f"r{i}" for i in range(50)]
    labels = ["a", "b"] * 25
    assert stratified_split(ids, labels, 3) == stratified_split(ids, labels, 3)
    assert stratified_split(ids, labels, 3) != stratified_split(ids, labels, 4)


def test_group_by_recording_keeps_segments_together():
    ids, labels = [], []
    for r in range(30):
        for s in range(4):
            ids.append(f"{'ab'[r % 2]}_{r:03d}_seg{s:03d}")
            labels.append("ab"[r % 2])
    a = stratified_split(ids, labels, seed=1, group_by_recording=True)
    by_rec = {}
    for sid, split in a.items():
        by_rec.setdefault(recording_of(sid), set()).add(split)
    assert all(len(v) == 1 for v in by_rec.values())
    # without grouping some recording straddles splits
    b = stratified_split(ids, labels, seed=1)
    assert any(len({b[f"{recording_of(s)}_seg{k:03d}"] for k in range(4)}) > 1 for s in ids)


def test_recording_of():
    assert recording_of("Kam_012_seg003") == "Kam_012"
    assert recording_of("take_seg1_seg000") == "take_seg1"
    assert recording_of("plain") == "plain"


def test_empty_split_input():
    with pytest.raises(EmptyInput):
        stratified_split([], [], 0)


def test_manifest_round_trip(tmp_path):
    ids = [f"i{i}" for i in range(20)]
    ds = SplitDataset(ids, ["a"] * 20, stratified_split(ids, ["a"] * 20, 2), 2)
    ds.save_manifest(tmp_path / "m.json")
    back = SplitDataset.load_manifest(tmp_path / "m.json")
    assert back.assignment == ds.assignment and back.ids == ids and back.split_seed == 2
    assert manifest_path(tmp_path / "f.csv").name == "f.splits.json"
    assert manifest_path(tmp_path / "imgs") == tmp_path / "imgs" / "splits.json"


# ---- synthetic ragas --------------------------------------------------------

def test_raga_table():
    assert len(RAGAS) == 10
    assert set(RAGA_BY_SYMBOL) == {"At", "Beg", "Beh", "Bh", "Bi", "Dh", "Har", "Hu", "Kal", "Kam"}
    same = lambda a, b: RAGA_BY_SYMBOL[a].pitch_classes == RAGA_BY_SYMBOL[b].pitch_classes
    assert same("At", "Beg") and same("At", "Bi") and same("Har", "Kam")
    assert not same("At", "Har")


@pytest.mark.parametrize("kw", [
    dict(pitch_classes=(2, 4), ascent=(2,), descent=(4,)),
    dict(pitch_classes=(0, 4), ascent=(0, 5), descent=(4,)),
    dict(pitch_classes=(0, 4), ascent=(0, 4), descent=(4,), nyasa=(7,)),
])
def test_raga_scale_validation(kw):
    with pytest.raises(ValueError):
        RagaScale("X", "x", **kw)


@pytest.mark.parametrize("scale", RAGAS, ids=lambda r: r.symbol)
def test_walk_moves_along_hints(scale):
    notes = note_walk(scale, 400, np.random.default_rng(0))
    assert {n % 12 for n in notes} <= set(scale.pitch_classes)
    assert set(notes) <= set(scale.ascent) | set(scale.descent)


def notes_of(scale):
    return sorted(set(scale.ascent) | set(scale.descent))


@pytest.mark.parametrize("scale", RAGAS, ids=lambda r: r.symbol)
def test_chroma_mass_stays_in_swara_set(scale):
    clip = AudioClip(synth_clip(scale, 5.0, np.random.default_rng(1)), SR)
    chroma = chroma_stft(clip).values
    mass = chroma.sum(axis=1)
    outside = [p for p in range(12) if p not in scale.pitch_classes]
    assert mass[outside].sum() / mass.sum() < 0.15


def test_same_swara_pair_shares_support():
    a, b = RAGA_BY_SYMBOL["Har"], RAGA_BY_SYMBOL["Kam"]
    assert {n % 12 for n in notes_of(a)} == {n % 12 for n in notes_of(b)} == set(a.pitch_classes)


@settings(max_examples=15)
@given(st.integers(0, 10 ** 6), st.sampled_from(RAGAS))
def test_clip_length_and_level(seed, scale):
    x = synth_clip(scale, 5.0, np.random.default_rng(seed))
    assert len(x) == 5 * SR
    assert 0.5 <= np.abs(x).max() <= 0.9 + 1e-12


def test_note_durations(monkeypatch):
    import ragakit.dataset as D

    seen = []
    orig = D._envelope
    monkeypatch.setattr(D, "_envelope", lambda n, sr: (seen.append(n), orig(n, sr))[1])
    synth_clip(RAGAS[0], 20.0, np.random.default_rng(0))
    secs = np.array(seen[:-1]) / SR  # the last note is cut at the clip end
    assert secs.min() >= NOTE_SECONDS[0] - 1 / SR and secs.max() <= NOTE_SECONDS[1]
    assert NYASA_SECONDS[1] <= NOTE_SECONDS[1]


def test_corpus_is_bit_identical_and_per_clip_seeded():
    a = synth_raga_corpus(RAGAS[:3], per_class=2, seconds=1.0, seed=5)
    b = synth_raga_corpus(RAGAS[:3], per_class=2, seconds=1.0, seed=5)
    assert [c.source_id for c, _ in a] == ["At_000", "At_001", "Beg_000", "Beg_001", "Beh_000", "Beh_001"]
    for (ca, la), (cb, lb) in zip(a, b):
        assert la == lb and ca.samples.tobytes() == cb.samples.tobytes()
    # clip 1 of a class does not depend on how many clips were requested
    c = synth_raga_corpus(RAGAS[:1], per_class=3, seconds=1.0, seed=5)
    assert c[1][0].samples.tobytes() == a[1][0].samples.tobytes()
    d = synth_raga_corpus(RAGAS[:1], per_class=1, seconds=1.0, seed=6)
    assert d[0][0].samples.tobytes() != a[0][0].samples.tobytes()


# ---- tables and image trees -------------------------------------------------

@pytest.fixture(scope="module")
def small_corpus():
    corpus = synth_raga_corpus(per_class=2, seconds=10.0, seed=0)
    segs, labels = [], []
    for clip, lab in corpus:
        for s in segment(clip, 5.0):
            segs.append(s)
            labels.append(lab)
    return segs, labels


def test_feature_table(tmp_path, small_corpus):
    segs, labels = small_corpus
    ds = build_feature_table(segs, labels, tmp_path / "f.csv", seed=0, group_by_recording=True)
    header = (tmp_path / "f.csv").read_text().splitlines()[0].split(",")
    assert len(header) == 31 and header[-1] == "label" and header[:30] == list(FEATURE_NAMES)
    x, labs = read_feature_csv(tmp_path / "f.csv")
    assert x.shape == (40, 30) and labs == labels
    # repr-formatted floats survive the round trip exactly
    np.testing.assert_array_equal(x[7], extract_feature_vector(segs[7]))
    m = json.loads((tmp_path / "f.splits.json").read_text())
    assert m["group_by_recording"] and sum(map(len, m["splits"].values())) == 40
    for split in ds.sizes():
        recs = {recording_of(s) for s in ds.members(split)}
        others = {recording_of(s) for o in ds.sizes() if o != split for s in ds.members(o)}
        assert not recs & others


def test_bad_csv_header(tmp_path):
    (tmp_path / "bad.csv").write_text("a,b,label\n1,2,x\n")
    with pytest.raises(IoFailure):
        read_feature_csv(tmp_path / "bad.csv")


def test_image_tree(tmp_path, small_corpus):
    segs, labels = small_corpus
    ds = build_image_tree(segs[:12], labels[:12], tmp_path / "img", seed=3)
    pngs = sorted((tmp_path / "img").rglob("*.png"))
    assert len(pngs) == 12
    for sid, lab in zip(ds.ids, ds.labels):
        p = tmp_path / "img" / ds.assignment[sid] / lab / f"{sid}.png"
        assert p.is_file()
    assert load_png(pngs[0]).shape == (256, 256, 3)
    assert (tmp_path / "img" / "splits.json").is_file()


def test_empty_table_inputs(tmp_path):
    with pytest.raises(EmptyInput):
        build_feature_table([], [], tmp_path / "f.csv")
    with pytest.raises(EmptyInput):
        build_image_tree([], [], tmp_path / "img")


def transition_counts(notes):
    """Counts of (from, to) pitch-class moves, octave folded."""
    c = Counter()
    for a, b in zip(notes, notes[1:]):
        c[(a % 12, b % 12)] += 1
    return c


def move_distance(a, b):
    """Total variation distance between two move distributions."""
    keys = set(a) | set(b)
    p = np.array([a[k] for k in keys]) / sum(a.values())
    q = np.array([b[k] for k in keys]) / sum(b.values())
    return 0.5 * np.abs(p - q).sum()


def test_same_swara_pair_differs_in_order_statistics():
    rng = np.random.default_rng(0)
    walk = lambda sym: transition_counts(note_walk(RAGA_BY_SYMBOL[sym], 4000, rng))
    har, har2, kam = walk("Har"), walk("Har"), walk("Kam")
    null = move_distance(har, har2)  # sampling noise between two walks of one raga
    assert null < 0.1
    assert move_distance(har, kam) > 2 * null + 0.1


def test_image_tree_of_120_segments(tmp_path):
    corpus = synth_raga_corpus(per_class=12, seconds=5.0, seed=1)
    segs = [c for c, _ in corpus]
    labels = [l for _, l in corpus]
    ds = build_image_tree(segs, labels, tmp_path / "img", seed=4)
    pngs = list((tmp_path / "img").rglob("*.png"))
    assert len(pngs) == 120
    assert {p.parent.parent.name for p in pngs} == {"train", "val", "test"}
    assert all(load_png(p).shape == (256, 256, 3) for p in pngs[:5])
    # the feature table under the same seed shares split membership
    ft = build_feature_table(segs, labels, seed=4)
    assert ft.assignment == ds.assignment
