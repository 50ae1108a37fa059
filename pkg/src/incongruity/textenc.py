"""Vocabulary with a minimum-count threshold and frozen pre-trained word vectors."""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .corpus import tokenize  # noqa: F401  (re-exported: tokenization lives with cleaning)

PAD, OOV = 0, 1
PAD_TOKEN, OOV_TOKEN = "<pad>", "<oov>"
DEFAULT_MIN_COUNT = 8
DEFAULT_DIM = 300


class EmbeddingFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Vocabulary:
    tokens: tuple[str, ...]          # index -> token, tokens[0:2] are reserved
    min_count: int = DEFAULT_MIN_COUNT

    def __post_init__(self):
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.tokens)})

    @property
    def token_to_index(self) -> dict[str, int]:
        return self._index

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index and self._index[token] > OOV

    def index(self, token: str) -> int:
        i = self._index.get(token, OOV)
        return OOV if i == PAD else i

    def encode(self, tokens: Iterable[str]) -> np.ndarray:
        return np.array([self.index(t) for t in tokens], dtype=np.int64)

    def to_json(self) -> dict:
        return {"min_count": self.min_count, "tokens": list(self.tokens[2:])}

    @classmethod
    def from_json(cls, data: dict) -> "Vocabulary":
        return cls((PAD_TOKEN, OOV_TOKEN, *data["tokens"]), int(data["min_count"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), ensure_ascii=False), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def count_tokens(samples: Iterable) -> Counter:
    counts: Counter = Counter()
    for s in samples:
        counts.update(s.headline_tokens)
        for p in s.paragraphs:
            counts.update(p)
    return counts


def build_vocab(samples: Iterable, min_count: int = DEFAULT_MIN_COUNT) -> Vocabulary:
    """Admit tokens seen at least ``min_count`` times in headlines and paragraphs.

    Order is descending count, ties broken lexicographically.  Pass the
    training split only.
    """
    counts = count_tokens(samples)
    kept = sorted((t for t, c in counts.items() if c >= min_count and t not in (PAD_TOKEN, OOV_TOKEN)),
                  key=lambda t: (-counts[t], t))
    return Vocabulary((PAD_TOKEN, OOV_TOKEN, *kept), min_count)


@dataclass
class EmbeddingTable:
    matrix: np.ndarray
    coverage_rate: float
    found: int = 0

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def coverage_report(self) -> str:
        return f"{100.0 * self.coverage_rate:.2f}%"


def random_embeddings(vocab: Vocabulary, dim: int = DEFAULT_DIM, seed: int = 0,
                      scale: float = 0.1) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), len(vocab), dim]))
    mat = rng.normal(0.0, scale, size=(len(vocab), dim))
    mat[PAD] = 0.0
    return mat


def load_embeddings(path: str | Path | None, vocab: Vocabulary, dim: int = DEFAULT_DIM,
                    seed: int = 0) -> EmbeddingTable:
    """Fill a ``|V| x dim`` table from a word-vector text file.

    Tokens missing from the file (and OOV) keep Gaussian vectors of scale 0.1
    drawn under ``seed``; PAD is zero.  A leading ``<count> <dim>`` header
    line, as written by word2vec tools, is skipped.
    """
    mat = random_embeddings(vocab, dim, seed)
    found = 0
    if path is not None:
        hit = np.zeros(len(vocab), dtype=bool)
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                parts = line.rstrip("\n").rstrip().split(" ")
                if not parts or parts == [""]:
                    continue
                if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                    continue
                if len(parts) != dim + 1:
                    raise EmbeddingFormatError(
                        f"line {lineno}: expected {dim} values, got {len(parts) - 1}")
                token = parts[0]
                idx = vocab.token_to_index.get(token)
                if idx is None or idx <= OOV or hit[idx]:
                    continue
                try:
                    vec = np.array(parts[1:], dtype=np.float64)
                except ValueError:
                    raise EmbeddingFormatError(f"line {lineno}: non-numeric vector entry") from None
                if not np.isfinite(vec).all():
                    raise EmbeddingFormatError(f"line {lineno}: non-finite vector entry")
                mat[idx] = vec
                hit[idx] = True
        found = int(hit.sum())
    real = len(vocab) - 2
    coverage = found / real if real > 0 else 0.0
    return EmbeddingTable(mat, coverage, found)


def save_embedding_table(table: EmbeddingTable, path: str | Path) -> None:
    np.savez(path, matrix=table.matrix, coverage_rate=table.coverage_rate, found=table.found)


def load_embedding_table(path: str | Path) -> EmbeddingTable:
    with np.load(path) as z:
        return EmbeddingTable(z["matrix"], float(z["coverage_rate"]), int(z["found"]))
