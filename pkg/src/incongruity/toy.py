"""Tiny synthetic two-topic Bangla-script corpus for smoke tests and demos."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .corpus import RawArticle

BN_DIGITS = "০১২৩৪৫৬৭৮৯"
TOPIC_STEMS = ("খেলা", "অর্থ")


def _bn_number(i: int) -> str:
    return "".join(BN_DIGITS[int(c)] for c in f"{i:03d}")


def topic_vocabulary(topic: int, size: int = 200) -> list[str]:
    return [TOPIC_STEMS[topic] + _bn_number(i) for i in range(size)]


def make_toy_corpus(n_articles: int = 600, vocab_size: int = 200, sentences: tuple[int, int] = (8, 15),
                    sentence_len: tuple[int, int] = (5, 9), headline_len: tuple[int, int] = (4, 7),
                    seed: int = 0) -> list[RawArticle]:
    """Articles alternate between two topics with disjoint vocabularies.

    Every sentence ends with a danda; a few commas are sprinkled in so the
    cleaning step has something to remove.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x70]))
    vocabs = [topic_vocabulary(t, vocab_size) for t in range(2)]
    out = []
    for i in range(n_articles):
        words = vocabs[i % 2]
        head = " ".join(rng.choice(words, size=int(rng.integers(headline_len[0], headline_len[1] + 1))))
        sents = []
        for _ in range(int(rng.integers(sentences[0], sentences[1] + 1))):
            toks = list(rng.choice(words, size=int(rng.integers(sentence_len[0], sentence_len[1] + 1))))
            if rng.random() < 0.3:
                toks[0] += ","
            sents.append(" ".join(toks) + "।")
        out.append(RawArticle(f"toy-{i:04d}", head, " ".join(sents), TOPIC_STEMS[i % 2]))
    return out


def write_corpus(articles, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for a in articles:
            rec = {"id": a.id, "headline": a.headline, "content": a.body}
            if a.category is not None:
                rec["category"] = a.category
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def make_toy_embeddings(dim: int = 300, vocab_size: int = 200, scale: float = 0.3,
                        seed: int = 0) -> dict[str, np.ndarray]:
    """Stand-in for pre-trained vectors: each topic's words scatter around a shared centroid."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x7E]))
    out = {}
    for topic in range(2):
        centroid = rng.normal(0.0, scale, dim)
        for tok in topic_vocabulary(topic, vocab_size):
            out[tok] = centroid + rng.normal(0.0, scale, dim)
    return out


def write_embeddings(vectors: dict[str, np.ndarray], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for tok, vec in vectors.items():
            fh.write(tok + " " + " ".join(f"{x:.6f}" for x in vec) + "\n")
