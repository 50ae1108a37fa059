import json

import pytest
from hypothesis import given, strategies as st

from incongruity.corpus import (CorpusError, RawArticle, SegmentedArticle, clean_text, corpus_stats,
                                filter_articles, load_corpus, prepare_corpus, segment_article,
                                segment_paragraphs, split_sentences, tokenize)


def write_lines(path, lines):
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    return path


def rec(i, **kw):
    base = {"id": f"a{i}", "headline": "শিরোনাম", "content": "বাক্য এক। বাক্য দুই।"}
    base.update(kw)
    return json.dumps(base, ensure_ascii=False)


def test_load_empty_file(tmp_path):
    assert load_corpus(write_lines(tmp_path / "c.jsonl", [])) == []


def test_load_keeps_file_order(tmp_path):
    arts = load_corpus(write_lines(tmp_path / "c.jsonl", [rec(3), rec(1), rec(2)]))
    assert [a.id for a in arts] == ["a3", "a1", "a2"]


def test_missing_content_reports_line(tmp_path):
    bad = json.dumps({"id": "x", "headline": "h"})
    with pytest.raises(CorpusError, match="line 2"):
        load_corpus(write_lines(tmp_path / "c.jsonl", [rec(1), bad, rec(3)]))


def test_malformed_json_reports_line(tmp_path):
    with pytest.raises(CorpusError, match="line 3"):
        load_corpus(write_lines(tmp_path / "c.jsonl", [rec(1), rec(2), "{not json"]))


def test_duplicate_id_named(tmp_path):
    with pytest.raises(CorpusError, match="'a1'"):
        load_corpus(write_lines(tmp_path / "c.jsonl", [rec(1), rec(1)]))


def test_category_carried(tmp_path):
    (a,) = load_corpus(write_lines(tmp_path / "c.jsonl", [rec(1, category="sports")]))
    assert a.category == "sports"


@pytest.mark.parametrize("raw, expected", [
    ("আমি, তুমি।", "আমি তুমি।"),
    ('সে বলল "ভালো"।', "সে বলল ভালো।"),
    ("এক; দুই: তিন?", "এক দুই তিন?"),
    ("(বন্ধনী) ভিতরে!", "বন্ধনী ভিতরে!"),
    ("‘উদ্ধৃতি’ আর — ড্যাশ।", "উদ্ধৃতি আর ড্যাশ।"),
])
def test_clean_removes_punctuation_keeps_terminators(raw, expected):
    assert clean_text(raw) == expected


def test_clean_edge_cases():
    assert clean_text("") == ""
    assert clean_text("ইতিমধ্যে পরিষ্কার।") == "ইতিমধ্যে পরিষ্কার।"


@given(st.text(max_size=60))
def test_clean_is_idempotent(text):
    once = clean_text(text)
    assert clean_text(once) == once


def test_split_sentences():
    assert split_sentences("") == []
    assert split_sentences("এক দুই। তিন চার। পাঁচ।") == ["এক দুই", "তিন চার", "পাঁচ"]
    assert split_sentences("কোনো বিরামচিহ্ন নেই") == ["কোনো বিরামচিহ্ন নেই"]
    assert split_sentences("প্রশ্ন? উত্তর!") == ["প্রশ্ন", "উত্তর"]


def sizes_for(n):
    return [len(p) for p in segment_paragraphs([f"s{i}" for i in range(n)])]


def test_paragraph_sizes():
    assert sizes_for(12) == [5, 5, 2]
    assert sizes_for(5) == [5]
    assert sizes_for(101) == [20, 20, 20, 20, 21]
    assert sizes_for(31) == [10, 10, 11]
    assert sizes_for(11) == [5, 6]


@given(st.integers(min_value=1, max_value=400))
def test_segmentation_keeps_every_sentence_in_order(n):
    sents = [f"s{i}" for i in range(n)]
    paras = segment_paragraphs(sents)
    assert [s for p in paras for s in p] == sents
    if len(paras) > 1:
        assert all(len(p) >= 2 for p in paras)


def test_tokenize():
    assert tokenize("") == []
    assert tokenize("আমি আজ বাজারে মাছ কিনলাম।") == ["আমি", "আজ", "বাজারে", "মাছ", "কিনলাম"]
    assert tokenize("এক দুই") == tokenize("এক দুই")


def body(n):
    return " ".join(f"বাক্য নম্বর {i}।" for i in range(n))


def test_filter_thresholds():
    short = segment_article(RawArticle("s", "শিরোনাম", body(3)))
    long = segment_article(RawArticle("l", "শিরোনাম", body(12)))
    headless = segment_article(RawArticle("h", "", body(12)))
    assert [a.id for a in filter_articles([short, long, headless])] == ["l"]
    assert filter_articles([]) == []
    assert long.sentence_counts == [5, 5, 2]


def test_prepare_corpus_tokens():
    (a,) = prepare_corpus([RawArticle("x", "খবর, আজ।", body(12))])
    assert a.headline_tokens == ["খবর", "আজ"]
    assert a.paragraphs[0][:3] == ["বাক্য", "নম্বর", "0"]


def test_stats_examples():
    arts = [SegmentedArticle("a", ["w"] * 4, [["x"] * 10]), SegmentedArticle("b", ["w"] * 6, [["x"] * 20])]
    s = corpus_stats(arts)
    assert (s.samples, s.headline_len_avg, s.headline_len_std) == (2, 5.0, 1.0)
    assert (s.content_len_avg, s.content_len_std) == (15.0, 5.0)
    assert corpus_stats(arts[:1]).headline_len_std == 0.0
    with pytest.raises(ValueError):
        corpus_stats([])


def test_record_round_trip():
    a = segment_article(RawArticle("x", "শিরোনাম", body(12), "c"))
    assert SegmentedArticle.from_record(json.loads(json.dumps(a.to_record()))) == a
