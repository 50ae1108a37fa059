"""Corpus ingestion: loading, cleaning, Bangla sentence splitting and paragraph segmentation."""
from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

# Bangla danda, question mark, exclamation mark, ASCII full stop.
TERMINATORS = "।?!."
_SPLIT_RE = re.compile("[" + re.escape(TERMINATORS) + "]")
_WS_RE = re.compile(r"\s+")

# (max sentence count, paragraph size); above the last bound the fallback size applies.
PARAGRAPH_SIZES: tuple[tuple[int, int], ...] = ((30, 5), (100, 10))
LONG_PARAGRAPH_SIZE = 20
MIN_BODY_SENTENCES = 5


class CorpusError(ValueError):
    """Raised for unreadable or inconsistent corpus files."""


@dataclass(frozen=True)
class RawArticle:
    id: str
    headline: str
    body: str
    category: str | None = None


@dataclass
class SegmentedArticle:
    id: str
    headline_tokens: list[str]
    paragraphs: list[list[str]]
    sentence_counts: list[int] = field(default_factory=list)
    category: str | None = None

    def to_record(self) -> dict:
        rec = {
            "id": self.id,
            "headline": self.headline_tokens,
            "paragraphs": self.paragraphs,
            "sentence_counts": self.sentence_counts,
        }
        if self.category is not None:
            rec["category"] = self.category
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "SegmentedArticle":
        return cls(rec["id"], list(rec["headline"]), [list(p) for p in rec["paragraphs"]],
                   list(rec.get("sentence_counts", [])), rec.get("category"))


@dataclass(frozen=True)
class CorpusStats:
    samples: int
    headline_len_avg: float
    headline_len_std: float
    content_len_avg: float
    content_len_std: float

    def format_row(self, name: str) -> str:
        return (f"{name:<10} {self.samples:>8d} {self.headline_len_avg:>8.2f} {self.headline_len_std:>8.2f}"
                f" {self.content_len_avg:>9.2f} {self.content_len_std:>9.2f}")

    @staticmethod
    def header() -> str:
        return (f"{'Dataset':<10} {'Samples':>8} {'H.Avg':>8} {'H.Std':>8}"
                f" {'C.Avg':>9} {'C.Std':>9}")


def load_corpus(path: str | Path) -> list[RawArticle]:
    """Read a JSON-lines corpus with string fields ``id``, ``headline``, ``content``.

    An optional string ``category`` field is carried along.
    """
    articles: list[RawArticle] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(rec, dict):
                raise CorpusError(f"line {lineno}: expected an object")
            for key in ("id", "headline", "content"):
                if not isinstance(rec.get(key), str):
                    raise CorpusError(f"line {lineno}: missing or non-string field '{key}'")
            category = rec.get("category")
            if category is not None and not isinstance(category, str):
                raise CorpusError(f"line {lineno}: non-string field 'category'")
            if rec["id"] in seen:
                raise CorpusError(f"line {lineno}: duplicate id '{rec['id']}'")
            seen.add(rec["id"])
            articles.append(RawArticle(rec["id"], rec["headline"], rec["content"], category))
    return articles


def _is_removable(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P") and ch not in TERMINATORS


def clean_text(text: str) -> str:
    """NFC-normalize, drop punctuation other than sentence terminators, squeeze whitespace."""
    text = unicodedata.normalize("NFC", text)
    text = "".join(ch for ch in text if not _is_removable(ch))
    return _WS_RE.sub(" ", text).strip()


def split_sentences(text: str) -> list[str]:
    """Split cleaned text on terminators. Text without any terminator is one sentence."""
    return [s.strip() for s in _SPLIT_RE.split(text) if s.strip()]


def paragraph_size(n_sentences: int, sizes: Sequence[tuple[int, int]] = PARAGRAPH_SIZES,
                   long_size: int = LONG_PARAGRAPH_SIZE) -> int:
    for bound, size in sizes:
        if n_sentences <= bound:
            return size
    return long_size


def segment_paragraphs(sentences: Sequence[str], sizes: Sequence[tuple[int, int]] = PARAGRAPH_SIZES,
                       long_size: int = LONG_PARAGRAPH_SIZE) -> list[list[str]]:
    """Chunk sentences into fixed-size paragraphs chosen by article length.

    A trailing chunk of a single sentence is folded into the previous paragraph.
    """
    if not sentences:
        raise ValueError("segment_paragraphs needs at least one sentence")
    s = paragraph_size(len(sentences), sizes, long_size)
    paras = [list(sentences[i:i + s]) for i in range(0, len(sentences), s)]
    if len(paras) >= 2 and len(paras[-1]) < 2:
        paras[-2].extend(paras.pop())
    return paras


def tokenize(text: str) -> list[str]:
    """Whitespace tokens with sentence terminators removed (NFC applied)."""
    text = unicodedata.normalize("NFC", text)
    return _SPLIT_RE.sub(" ", text).split()


def segment_article(article: RawArticle) -> SegmentedArticle:
    headline = tokenize(clean_text(article.headline))
    sentences = split_sentences(clean_text(article.body))
    if not sentences:
        return SegmentedArticle(article.id, headline, [], [], article.category)
    paras = segment_paragraphs(sentences)
    tokens = [[tok for sent in p for tok in tokenize(sent)] for p in paras]
    return SegmentedArticle(article.id, headline, tokens, [len(p) for p in paras], article.category)


def filter_articles(articles: Iterable[SegmentedArticle],
                    min_sentences: int = MIN_BODY_SENTENCES) -> list[SegmentedArticle]:
    return [
        a for a in articles
        if a.headline_tokens
        and len(a.paragraphs) >= 2
        and sum(a.sentence_counts) >= min_sentences
        and all(a.paragraphs)
    ]


def prepare_corpus(raw: Iterable[RawArticle]) -> list[SegmentedArticle]:
    """Clean, segment and filter a raw corpus."""
    return filter_articles(segment_article(a) for a in raw)


def corpus_stats(articles: Sequence) -> CorpusStats:
    """Token-length mean and population std of headlines and full bodies.

    Accepts anything with ``headline_tokens`` and ``paragraphs``
    (segmented articles and labeled samples alike).
    """
    if not articles:
        raise ValueError("corpus_stats needs at least one article")
    head = np.array([len(a.headline_tokens) for a in articles], dtype=np.float64)
    body = np.array([sum(len(p) for p in a.paragraphs) for a in articles], dtype=np.float64)
    return CorpusStats(len(articles), float(head.mean()), float(head.std()),
                       float(body.mean()), float(body.std()))
