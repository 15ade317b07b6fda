import numpy as np
import pytest
from hypothesis import given, strategies as st

from modalpix.text_embedding import (
    EmbeddingTable,
    SkipGramConfig,
    build_vocab,
    load_embeddings,
    lookup,
    save_embeddings,
    tokenize,
    train_skipgram,
)


@pytest.mark.parametrize(
    "text, expected",
    [
        ("Extol craft scissors", ["extol", "craft", "scissors"]),
        ("", []),
        ("Ice-Cream 101!", ["ice", "cream", "101"]),
        ("  --  ", []),
    ],
)
def test_tokenize(text, expected):
    assert tokenize(text) == expected


@given(st.text())
def test_tokenize_yields_lowercase_alnum(text):
    for tok in tokenize(text):
        assert tok and tok == tok.lower()
        assert all(ch in "abcdefghijklmnopqrstuvwxyz0123456789" for ch in tok)


def test_build_vocab_orders_by_frequency():
    v = build_vocab([["a", "b", "a"]], min_count=1)
    assert v.counts == {"a": 2, "b": 1}
    assert v.id_of["a"] == 0


def test_build_vocab_threshold():
    v = build_vocab([["a", "b", "a"]], min_count=2)
    assert v.words == ("a",)


def test_build_vocab_ties_lexicographic():
    v = build_vocab([["x", "y"], ["y", "z"]], min_count=1)
    assert v.words == ("y", "x", "z")
    assert [v.id_of[w] for w in v.words] == [0, 1, 2]


def test_build_vocab_errors():
    with pytest.raises(ValueError):
        build_vocab([["a"]], min_count=2)
    with pytest.raises(ValueError):
        build_vocab([["a"]], min_count=0)


def test_config_validation():
    with pytest.raises(ValueError):
        SkipGramConfig(dim=10)
    with pytest.raises(ValueError):
        SkipGramConfig(window=0)
    with pytest.raises(ValueError):
        SkipGramConfig(learning_rate=0.0)


@pytest.fixture(scope="module")
def small_corpus():
    rng = np.random.default_rng(0)
    words = ["apple", "pear", "plum", "fig", "kiwi", "lime"]
    return [list(rng.choice(words, 6)) for _ in range(60)]


@pytest.fixture(scope="module")
def small_table(small_corpus):
    vocab = build_vocab(small_corpus)
    return train_skipgram(small_corpus, vocab, SkipGramConfig(dim=36, epochs=2, seed=11)), vocab


def test_table_shape_and_coverage(small_table):
    table, vocab = small_table
    assert table.matrix.shape == (len(vocab), 36)
    for w in vocab.words:
        vec = lookup(table, w)
        assert vec is not None and vec.shape == (36,)


def test_range_consistency(small_table):
    table, _ = small_table
    assert table.global_min == float(table.matrix.min())
    assert table.global_max == float(table.matrix.max())


def test_training_deterministic(small_corpus, small_table):
    table, vocab = small_table
    again = train_skipgram(small_corpus, vocab, SkipGramConfig(dim=36, epochs=2, seed=11))
    assert again.matrix.tobytes() == table.matrix.tobytes()
    other = train_skipgram(small_corpus, vocab, SkipGramConfig(dim=36, epochs=2, seed=12))
    assert other.matrix.tobytes() != table.matrix.tobytes()


def test_oov_token_in_corpus_rejected(small_corpus):
    vocab = build_vocab(small_corpus)
    with pytest.raises(KeyError):
        train_skipgram([["apple", "durian"]], vocab, SkipGramConfig(dim=3))


def test_lookup_oov_is_none(small_table):
    table, _ = small_table
    assert lookup(table, "durian") is None


def test_save_load_roundtrip(tmp_path, small_table):
    table, vocab = small_table
    path = tmp_path / "t.emb"
    save_embeddings(table, path)
    header = path.read_text().splitlines()[0].split()
    assert header[:4] == ["CHAM-EMB", "v1", str(len(vocab)), "36"]
    loaded = load_embeddings(path)
    assert loaded.words == table.words
    assert loaded.matrix.tobytes() == table.matrix.tobytes()
    assert (loaded.global_min, loaded.global_max) == (table.global_min, table.global_max)
    for w in vocab.words:
        assert np.array_equal(lookup(loaded, w), lookup(table, w))


def test_load_rejects_bad_header(tmp_path):
    p = tmp_path / "bad.emb"
    p.write_text("WORD2VEC 3 3\n")
    with pytest.raises(ValueError):
        load_embeddings(p)


def test_cooccurring_words_end_up_closer():
    # two disjoint topics that never share a sentence
    corpus = [["a", "b"] * 3 if i % 2 == 0 else ["c", "d"] * 3 for i in range(2000)]
    vocab = build_vocab(corpus)
    table = train_skipgram(corpus, vocab, SkipGramConfig(dim=12, epochs=1, seed=5))
    v = table.vectors
    assert v["a"] @ v["b"] > v["a"] @ v["c"]
    together = np.mean([v["a"] @ v["b"], v["c"] @ v["d"]])
    apart = np.mean([v["a"] @ v["c"], v["a"] @ v["d"], v["b"] @ v["c"], v["b"] @ v["d"]])
    assert together > apart


def test_table_requires_dim_multiple_of_three():
    with pytest.raises(ValueError):
        EmbeddingTable.from_matrix(["a"], np.zeros((1, 4)))
