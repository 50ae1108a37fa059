from collections import Counter

import numpy as np
import pytest
from hypothesis import given, strategies as st

from incongruity.corpus import SegmentedArticle
from incongruity.textenc import (OOV, PAD, EmbeddingFormatError, Vocabulary, build_vocab, load_embedding_table,
                                 load_embeddings, save_embedding_table)


def doc(*paragraphs, headline=()):
    return SegmentedArticle("d", list(headline), [list(p) for p in paragraphs])


def test_min_count_boundary():
    v = build_vocab([doc(["x"] * 8 + ["y"] * 7)])
    assert "x" in v and "y" not in v
    assert v.index("y") == OOV


def test_empty_corpus_vocab():
    v = build_vocab([])
    assert len(v) == 2


def test_vocab_deterministic_and_ordered():
    corpus = [doc(["b"] * 9 + ["a"] * 9 + ["c"] * 12, headline=["a"])]
    v1, v2 = build_vocab(corpus), build_vocab(corpus)
    assert v1.tokens == v2.tokens
    assert v1.tokens[2:] == ("c", "a", "b")


def test_headline_tokens_count():
    v = build_vocab([doc(["x"] * 4, headline=["x"] * 4)])
    assert "x" in v


def test_pad_token_maps_to_oov():
    v = build_vocab([doc(["x"] * 8)])
    assert v.index(v.tokens[PAD]) == OOV


def test_vocab_json_round_trip(tmp_path):
    v = build_vocab([doc(["x"] * 8, ["y"] * 9)])
    v.save(tmp_path / "v.json")
    assert Vocabulary.load(tmp_path / "v.json") == v


@given(st.lists(st.lists(st.sampled_from("abcdefghij"), max_size=30), max_size=8))
def test_vocab_matches_counting_oracle(paragraphs):
    corpus = [doc(*paragraphs)] if paragraphs else []
    counts = Counter(t for p in paragraphs for t in p)
    assert set(build_vocab(corpus).tokens[2:]) == {t for t, c in counts.items() if c >= 8}


def write_vectors(path, rows, dim, header=False):
    lines = [f"{len(rows)} {dim}"] if header else []
    lines += [tok + " " + " ".join(str(float(x)) for x in vec) for tok, vec in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def four_token_vocab():
    return build_vocab([doc(["a"] * 8, ["b"] * 8, ["c"] * 8, ["d"] * 8)])


def test_coverage_two_of_four(tmp_path):
    v = four_token_vocab()
    path = write_vectors(tmp_path / "e.txt", [("a", [1, 2, 3]), ("zz", [0, 0, 0]), ("c", [4, 5, 6])], 3)
    table = load_embeddings(path, v, 3)
    assert table.coverage_rate == 0.5 and table.coverage_report() == "50.00%"
    np.testing.assert_array_equal(table.matrix[v.index("a")], [1, 2, 3])
    assert np.all(table.matrix[PAD] == 0)


def test_word2vec_header_skipped(tmp_path):
    path = write_vectors(tmp_path / "e.txt", [("a", [1, 2])], 2, header=True)
    assert load_embeddings(path, four_token_vocab(), 2).found == 1


def test_dimension_mismatch_names_line(tmp_path):
    path = tmp_path / "e.txt"
    path.write_text("a 1 2 3\nb 1 2\n", encoding="utf-8")
    with pytest.raises(EmbeddingFormatError, match="line 2"):
        load_embeddings(path, four_token_vocab(), 3)


def test_empty_vocab_coverage_zero(tmp_path):
    path = write_vectors(tmp_path / "e.txt", [("a", [1, 2])], 2)
    table = load_embeddings(path, build_vocab([]), 2)
    assert table.coverage_rate == 0.0 and table.matrix.shape == (2, 2)


def test_missing_tokens_random_but_seeded():
    v = four_token_vocab()
    a, b = load_embeddings(None, v, 4, seed=3), load_embeddings(None, v, 4, seed=3)
    np.testing.assert_array_equal(a.matrix, b.matrix)
    assert a.coverage_rate == 0.0 and np.all(a.matrix[PAD] == 0)


def test_table_round_trip(tmp_path):
    t = load_embeddings(None, four_token_vocab(), 4)
    save_embedding_table(t, tmp_path / "t.npz")
    back = load_embedding_table(tmp_path / "t.npz")
    np.testing.assert_array_equal(back.matrix, t.matrix)
    assert back.coverage_rate == t.coverage_rate
