import numpy as np
import pytest
from hypothesis import given, strategies as st

from modalpix.pixel_encoder import (
    LayoutSpec,
    TextEncoder,
    encode_text,
    load_png,
    normalize_vector,
    pack_rgb,
    save_png,
)
from modalpix.text_embedding import EmbeddingTable


def make_table(words, dim, seed=0):
    rng = np.random.default_rng(seed)
    return EmbeddingTable.from_matrix(words, rng.normal(size=(len(words), dim)))


def test_normalize_endpoints():
    assert normalize_vector([-2.0, 3.0], -2.0, 3.0).tolist() == [0, 255]


def test_normalize_degenerate_range():
    assert normalize_vector([0.5, 0.5, 0.5], 0.5, 0.5).tolist() == [127, 127, 127]


def test_normalize_round_half_up():
    # 0.0 maps to 127.5 exactly, which rounds up
    assert normalize_vector([-1.0, 0.0, 1.0], -1.0, 1.0).tolist() == [0, 128, 255]


def test_normalize_clamps_marginal_overshoot():
    assert normalize_vector([-1.0 - 1e-9, 1.0 + 1e-9], -1.0, 1.0).tolist() == [0, 255]


@given(
    st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=30),
    st.floats(1e-3, 1e3),
)
def test_quantization_bound(values, width):
    lo = min(values)
    hi = lo + width + (max(values) - lo)
    b = normalize_vector(values, lo, hi).astype(float)
    deq = lo + b / 255.0 * (hi - lo)
    assert np.all(np.abs(deq - np.asarray(values)) <= (hi - lo) / 255.0 * 0.5 * (1 + 1e-9) + 1e-9)


def test_pack_rgb():
    assert pack_rgb([255, 0, 0, 0, 255, 0]).tolist() == [[255, 0, 0], [0, 255, 0]]
    assert pack_rgb(np.zeros(15)).shape == (5, 3)
    assert pack_rgb(np.zeros(36)).shape == (12, 3)
    with pytest.raises(ValueError):
        pack_rgb([1, 2, 3, 4])


def test_encode_empty_is_background():
    table = make_table(["a"], 15)
    layout = LayoutSpec(pixels_per_word=5, block_scale=2, grid_width=15, max_words=3, background=(9, 8, 7))
    enc = encode_text([], table, layout)
    assert enc.word_count == 0
    assert (enc.pixels == (9, 8, 7)).all()
    assert enc.pixels.shape == (2, 30, 3)


def test_encode_three_words_on_one_row():
    words = ["extol", "craft", "scissors"]
    table = make_table(words, 15)
    layout = LayoutSpec(pixels_per_word=5, block_scale=1, grid_width=15, max_words=3)
    enc = encode_text(words, table, layout)
    assert enc.pixels.shape == (1, 15, 3)
    for i, w in enumerate(words):
        expected = pack_rgb(normalize_vector(table.vectors[w], table.global_min, table.global_max))
        assert np.array_equal(enc.pixels[0, 5 * i:5 * i + 5], expected)


def test_words_wrap_instead_of_straddling():
    table = make_table(["a", "b", "c"], 15)
    layout = LayoutSpec(pixels_per_word=5, block_scale=1, grid_width=12, max_words=3)
    enc = encode_text(["a", "b", "c"], table, layout)
    assert enc.pixels.shape == (2, 12, 3)
    run = lambda w: pack_rgb(normalize_vector(table.vectors[w], table.global_min, table.global_max))
    assert np.array_equal(enc.pixels[0, 5:10], run("b"))
    assert np.array_equal(enc.pixels[1, 0:5], run("c"))
    assert (enc.pixels[0, 10:] == 0).all()


def test_block_scaling():
    table = make_table(["a"], 6)
    layout = LayoutSpec(pixels_per_word=2, block_scale=3, grid_width=2, max_words=1)
    enc = encode_text(["a"], table, layout)
    assert enc.pixels.shape == (3, 6, 3)
    assert (enc.pixels[:, :3] == enc.pixels[0, 0]).all()
    assert (enc.pixels[:, 3:] == enc.pixels[0, 3]).all()


def test_oov_skipped_and_counted():
    table = make_table(["a", "b"], 6)
    layout = LayoutSpec(pixels_per_word=2, block_scale=1, grid_width=4, max_words=2)
    enc = encode_text(["zz", "a", "qq", "b"], table, layout)
    assert enc.word_count == 2 and enc.oov_count == 2
    assert np.array_equal(enc.pixels, encode_text(["a", "b"], table, layout).pixels)


def test_truncation_to_max_words():
    words = list("abcdef")
    table = make_table(words, 6)
    layout = LayoutSpec(pixels_per_word=2, block_scale=1, grid_width=4, max_words=3)
    long = encode_text(["x"] + words, table, layout)
    short = encode_text(words[:3], table, layout)
    assert long.word_count == 3
    assert np.array_equal(long.pixels, short.pixels)


def test_word_order_permutes_runs():
    table = make_table(["a", "b"], 6)
    layout = LayoutSpec(pixels_per_word=2, block_scale=1, grid_width=4, max_words=2)
    ab = encode_text(["a", "b"], table, layout).pixels
    ba = encode_text(["b", "a"], table, layout).pixels
    assert np.array_equal(ab[:, :2], ba[:, 2:]) and np.array_equal(ab[:, 2:], ba[:, :2])


def test_distinct_vectors_give_distinct_runs():
    table = EmbeddingTable.from_matrix(["a", "b"], np.array([[0.0, 0, 0], [1.0, 0, 0]]))
    layout = LayoutSpec(pixels_per_word=1, block_scale=1, grid_width=1, max_words=1)
    assert not np.array_equal(encode_text(["a"], table, layout).pixels,
                              encode_text(["b"], table, layout).pixels)


def test_layout_must_match_dim():
    table = make_table(["a"], 36)
    with pytest.raises(ValueError):
        encode_text(["a"], table, LayoutSpec(pixels_per_word=5))
    assert LayoutSpec.for_table(table).pixels_per_word == 12


def test_encode_deterministic_and_png_roundtrip(tmp_path):
    words = ["extol", "craft", "scissors"]
    table = make_table(words, 36)
    enc1 = TextEncoder(table).encode("Extol craft scissors")
    enc2 = encode_text(words, table, LayoutSpec.for_table(table))
    assert np.array_equal(enc1.pixels, enc2.pixels)
    save_png(enc1.pixels, tmp_path / "t.png")
    assert np.array_equal(load_png(tmp_path / "t.png"), enc1.pixels)
    save_png(enc2.pixels, tmp_path / "u.png")
    assert (tmp_path / "t.png").read_bytes() == (tmp_path / "u.png").read_bytes()


@given(st.integers(1, 20), st.integers(1, 20), st.integers(0, 2**32 - 1))
def test_png_roundtrip_random(h, w, seed):
    import tempfile, os
    px = np.random.default_rng(seed).integers(0, 256, (h, w, 3), dtype=np.uint8)
    with tempfile.TemporaryDirectory() as d:
        p = os.path.join(d, "x.png")
        save_png(px, p)
        assert np.array_equal(load_png(p), px)
