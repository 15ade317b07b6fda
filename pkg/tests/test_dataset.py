from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modalpix.dataset import (
    ManifestError,
    SampleRecord,
    ShapeGeometry,
    SyntheticSpec,
    class_keywords,
    generate_synthetic,
    load_manifest,
    nearest_mean_color_accuracy,
    render_shape,
    resize_nearest,
    split,
    write_dataset,
)
from modalpix.pixel_encoder import save_png
from modalpix.text_embedding import tokenize


def write_images(tmp_path, names, size=(8, 8)):
    rng = np.random.default_rng(0)
    for n in names:
        save_png(rng.integers(0, 256, size + (3,), dtype=np.uint8), tmp_path / n)


def test_load_manifest(tmp_path):
    write_images(tmp_path, ["a.png", "b.png", "c.png"])
    (tmp_path / "m.tsv").write_text(
        "x1\ta.png\t0\thello world\nx2\tb.png\t2\tsome text, with commas\nx3\tc.png\t1\t\n"
    )
    records, k = load_manifest(tmp_path / "m.tsv", size=(8, 8))
    assert len(records) == 3 and k == 3
    assert records[1].text == "some text, with commas"
    assert records[2].text == ""
    assert records[0].image.shape == (8, 8, 3) and records[0].image.dtype == np.uint8


def test_load_manifest_resizes(tmp_path):
    write_images(tmp_path, ["a.png"], size=(10, 20))
    (tmp_path / "m.tsv").write_text("x\ta.png\t0\tt\n")
    records, _ = load_manifest(tmp_path / "m.tsv", size=(64, 64))
    assert records[0].image.shape == (64, 64, 3)


def test_load_manifest_duplicate_id(tmp_path):
    write_images(tmp_path, ["a.png"])
    (tmp_path / "m.tsv").write_text("dup\ta.png\t0\tt\ndup\ta.png\t1\tt\n")
    with pytest.raises(ManifestError, match="dup"):
        load_manifest(tmp_path / "m.tsv")


def test_load_manifest_errors(tmp_path):
    write_images(tmp_path, ["a.png"])
    (tmp_path / "bad.tsv").write_text("x\ta.png\t0\tt\ny\ta.png\n")
    with pytest.raises(ManifestError, match=":2:"):
        load_manifest(tmp_path / "bad.tsv")
    (tmp_path / "lab.tsv").write_text("x\ta.png\tzero\tt\n")
    with pytest.raises(ManifestError, match="label"):
        load_manifest(tmp_path / "lab.tsv")
    (tmp_path / "miss.tsv").write_text("x\tnope.png\t0\tt\n")
    with pytest.raises(ManifestError, match="missing image"):
        load_manifest(tmp_path / "miss.tsv")


def test_resize_nearest():
    px = np.arange(4 * 3, dtype=np.uint8).reshape(2, 2, 3)
    big = resize_nearest(px, (4, 4))
    assert np.array_equal(big[:2, :2], np.broadcast_to(px[0, 0], (2, 2, 3)))
    assert np.array_equal(big[2:, 2:], np.broadcast_to(px[1, 1], (2, 2, 3)))


def test_synthetic_counts_and_ids():
    records, k = generate_synthetic(SyntheticSpec(num_classes=5, samples_per_class=200, image_size=(16, 16)))
    assert k == 5 and len(records) == 1000
    assert len({r.id for r in records}) == 1000
    assert Counter(r.label for r in records) == {c: 200 for c in range(5)}


def test_synthetic_keyword_prob_one():
    spec = SyntheticSpec(num_classes=3, samples_per_class=10, image_size=(16, 16), text_keyword_prob=1.0)
    records, _ = generate_synthetic(spec)
    for r in records:
        assert set(tokenize(r.text)) <= set(class_keywords(r.label, spec))
        assert len(tokenize(r.text)) == spec.words_per_sample


def test_synthetic_deterministic():
    spec = SyntheticSpec(num_classes=2, samples_per_class=5, image_size=(16, 16), seed=4)
    a, _ = generate_synthetic(spec)
    b, _ = generate_synthetic(spec)
    assert all(np.array_equal(x.image, y.image) and x.text == y.text for x, y in zip(a, b))


def test_noiseless_same_geometry_identical():
    spec = SyntheticSpec(image_noise_std=0.0, image_size=(32, 32))
    geom = ShapeGeometry((14.0, 17.5), 6.0)
    assert np.array_equal(render_shape(3, geom, spec), render_shape(3, geom, spec))
    assert not np.array_equal(render_shape(3, geom, spec), render_shape(2, geom, spec))


def test_nearest_mean_color_oracle_separates_noiseless_images():
    spec = SyntheticSpec(num_classes=5, samples_per_class=40, image_noise_std=0.0,
                         image_confusion_prob=0.0, seed=9)
    records, k = generate_synthetic(spec)
    assert nearest_mean_color_accuracy(records, k) == 1.0


def test_confusion_prob_caps_image_signal():
    spec = SyntheticSpec(num_classes=5, samples_per_class=100, image_noise_std=0.0,
                         image_confusion_prob=0.3, seed=9)
    records, k = generate_synthetic(spec)
    acc = nearest_mean_color_accuracy(records, k)
    assert 0.6 < acc < 0.8


def test_split_75_25():
    records, _ = generate_synthetic(SyntheticSpec(num_classes=3, samples_per_class=100, image_size=(8, 8)))
    train, test = split(records, 0.75, seed=1)
    assert Counter(r.label for r in train) == {0: 75, 1: 75, 2: 75}
    assert Counter(r.label for r in test) == {0: 25, 1: 25, 2: 25}
    assert {r.id for r in train}.isdisjoint(r.id for r in test)
    assert len(train) + len(test) == len(records)
    again = split(records, 0.75, seed=1)
    assert [r.id for r in again[0]] == [r.id for r in train]


def test_split_errors():
    records, _ = generate_synthetic(SyntheticSpec(num_classes=2, samples_per_class=3, image_size=(8, 8)))
    with pytest.raises(ValueError):
        split(records, 1.0, seed=0)
    with pytest.raises(ValueError):
        split(records, 0.0, seed=0)
    # floor(f * n) < n for f < 1, so every class keeps a test sample
    train, test = split(records, 0.99, seed=0)
    assert Counter(r.label for r in test) == {0: 1, 1: 1}


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 4), min_size=2, max_size=80), st.floats(0.05, 0.9), st.integers(0, 1000))
def test_split_stratified(labels, frac, seed):
    img = np.zeros((1, 1, 3), dtype=np.uint8)
    records = [SampleRecord(f"r{i}", img, "", lab) for i, lab in enumerate(labels)]
    counts = Counter(labels)
    train, test = split(records, frac, seed)
    got = Counter(r.label for r in train)
    held = Counter(r.label for r in test)
    for lab, n in counts.items():
        assert abs(got[lab] - frac * n) <= 1
        assert held[lab] >= 1


def test_write_then_load_roundtrip(tmp_path):
    records, k = generate_synthetic(SyntheticSpec(num_classes=2, samples_per_class=3, image_size=(16, 16)))
    manifest = write_dataset(records, tmp_path)
    loaded, k2 = load_manifest(manifest, size=(16, 16))
    assert k2 == k
    for a, b in zip(records, loaded):
        assert (a.id, a.text, a.label) == (b.id, b.text, b.label)
        assert np.array_equal(a.image, b.image)
