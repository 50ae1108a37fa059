"""Synthetic incongruent news by mixing donor paragraphs into target articles.

Four mix-up schemes are supported:

* ``I``   insert ``m`` donor paragraphs at random positions (length grows)
* ``II``  append the whole donor body (length grows)
* ``III`` replace ``m`` scattered paragraphs (length preserved)
* ``IV``  replace a contiguous run of ``m`` paragraphs (length preserved)

Only III and IV are used by default since they keep the paragraph-count
distribution of the original articles.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import SegmentedArticle


class GenType(str, Enum):
    NONE = "NONE"
    I = "I"
    II = "II"
    III = "III"
    IV = "IV"


DEFAULT_TYPES = (GenType.III, GenType.IV)


class GenerationError(RuntimeError):
    pass


@dataclass
class LabeledSample:
    id: str
    headline_tokens: list[str]
    paragraphs: list[list[str]]
    para_labels: list[int]
    doc_label: int
    gen_type: GenType = GenType.NONE
    # one entry per swapped-in paragraph: {"position", "source_id", "source_paragraph"}
    provenance: list[dict] = field(default_factory=list)

    def __post_init__(self):
        if len(self.para_labels) != len(self.paragraphs):
            raise ValueError(f"{self.id}: para_labels/paragraphs length mismatch")
        if self.doc_label != int(any(self.para_labels)):
            raise ValueError(f"{self.id}: doc_label inconsistent with para_labels")
        if (self.gen_type == GenType.NONE) != (not any(self.para_labels)):
            raise ValueError(f"{self.id}: gen_type inconsistent with para_labels")

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "headline": self.headline_tokens,
            "paragraphs": self.paragraphs,
            "para_labels": self.para_labels,
            "doc_label": self.doc_label,
            "gen_type": self.gen_type.value,
            "provenance": self.provenance,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "LabeledSample":
        paras = [p.split() if isinstance(p, str) else list(p) for p in rec["paragraphs"]]
        head = rec["headline"]
        head = head.split() if isinstance(head, str) else list(head)
        labels = [int(x) for x in rec.get("para_labels", [0] * len(paras))]
        return cls(str(rec["id"]), head, paras, labels, int(rec.get("doc_label", int(any(labels)))),
                   GenType(rec.get("gen_type", "NONE")), list(rec.get("provenance", [])))


@dataclass
class DatasetSplit:
    train: list = field(default_factory=list)
    dev: list = field(default_factory=list)
    test: list = field(default_factory=list)
    pool: list = field(default_factory=list)

    @property
    def sample_pool_ids(self) -> set[str]:
        return {a.id for a in self.pool}


def derive_rng(seed: int, *counters: int) -> np.random.Generator:
    """Independent stream for (seed, counters); stable regardless of call order."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, counters)]))


def partition_corpus(articles: Sequence[SegmentedArticle],
                     ratios: Sequence[float] = (0.6, 0.15, 0.15, 0.1),
                     seed: int = 0) -> DatasetSplit:
    """Shuffle under ``seed`` and slice into train/dev/test targets and the donor pool."""
    if len(ratios) != 4 or any(r <= 0 for r in ratios) or not math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
        raise ValueError(f"ratios must be four positive fractions summing to 1, got {tuple(ratios)}")
    n = len(articles)
    bounds = np.floor(np.cumsum(ratios) * n + 1e-9).astype(int)
    bounds[-1] = n
    sizes = np.diff(np.concatenate([[0], bounds]))
    if (sizes == 0).any():
        raise ValueError(f"{n} articles cannot fill every split for ratios {tuple(ratios)}")
    order = derive_rng(seed).permutation(n)
    parts = np.split(order, bounds[:-1])
    return DatasetSplit(*[[articles[i] for i in p] for p in parts])


def _swap_budget(k: int, rng: np.random.Generator) -> int:
    return int(rng.integers(1, math.ceil(k / 2) + 1))


def generate_incongruent(target: SegmentedArticle, pool: Sequence[SegmentedArticle],
                         gen_type: GenType | str, rng: np.random.Generator | int,
                         cross_category: bool = False) -> LabeledSample:
    """Mix paragraphs of one donor article from ``pool`` into ``target``.

    Draw order: budget ``m``, donor, donor start paragraph, target positions.
    When no donor has ``m`` paragraphs the budget shrinks until one does.
    With ``cross_category`` and a known target category, donors are limited to
    articles of a different (known) category.
    """
    gen_type = GenType(gen_type)
    if gen_type == GenType.NONE:
        raise ValueError("generate_incongruent needs a mix-up type")
    if isinstance(rng, (int, np.integer)):
        rng = derive_rng(int(rng))
    k = len(target.paragraphs)
    if k < 2:
        raise GenerationError(f"{target.id}: target needs at least 2 paragraphs, has {k}")
    donors = [d for d in pool if d.id != target.id and d.paragraphs]
    if cross_category and target.category is not None:
        donors = [d for d in donors if d.category is not None and d.category != target.category]
    if not donors:
        raise GenerationError(f"{target.id}: donor pool is empty")

    if gen_type == GenType.II:
        donor = donors[int(rng.integers(len(donors)))]
        src = list(range(len(donor.paragraphs)))
        positions = list(range(k, k + len(src)))
    else:
        m = _swap_budget(k, rng)
        while True:
            eligible = [d for d in donors if len(d.paragraphs) >= m]
            if eligible:
                break
            if m == 1:
                raise GenerationError(f"{target.id}: no donor paragraphs available")
            m -= 1
        donor = eligible[int(rng.integers(len(eligible)))]
        start = int(rng.integers(0, len(donor.paragraphs) - m + 1))
        src = list(range(start, start + m))
        if gen_type == GenType.III:
            positions = sorted(int(p) for p in rng.choice(k, size=m, replace=False))
        elif gen_type == GenType.IV:
            first = int(rng.integers(0, k - m + 1))
            positions = list(range(first, first + m))
        else:  # Type I: final positions in the grown article
            positions = sorted(int(p) for p in rng.choice(k + m, size=m, replace=False))

    if gen_type in (GenType.III, GenType.IV):
        paragraphs = [list(p) for p in target.paragraphs]
        labels = [0] * k
        for pos, si in zip(positions, src):
            paragraphs[pos] = list(donor.paragraphs[si])
            labels[pos] = 1
    else:
        total = k + len(src)
        inserted = dict(zip(positions, src))
        own = iter(target.paragraphs)
        paragraphs, labels = [], []
        for pos in range(total):
            if pos in inserted:
                paragraphs.append(list(donor.paragraphs[inserted[pos]]))
                labels.append(1)
            else:
                paragraphs.append(list(next(own)))
                labels.append(0)

    provenance = [{"position": p, "source_id": donor.id, "source_paragraph": s}
                  for p, s in zip(positions, src)]
    return LabeledSample(target.id, list(target.headline_tokens), paragraphs, labels, 1, gen_type, provenance)


def congruent_sample(target: SegmentedArticle) -> LabeledSample:
    return LabeledSample(target.id, list(target.headline_tokens), [list(p) for p in target.paragraphs],
                         [0] * len(target.paragraphs), 0, GenType.NONE, [])


def build_dataset(targets: Sequence[SegmentedArticle], pool: Sequence[SegmentedArticle],
                  incongruent_fraction: float = 0.5,
                  allowed_types: Iterable[GenType | str] = DEFAULT_TYPES,
                  seed: int = 0, stream: int = 0, cross_category: bool = False) -> list[LabeledSample]:
    """One labeled sample per target, each decided by its own derived random stream.

    ``stream`` separates the splits generated under one master seed.
    """
    if not 0 < incongruent_fraction < 1:
        raise ValueError("incongruent_fraction must lie strictly between 0 and 1")
    types = [GenType(t) for t in allowed_types]
    if not types or GenType.NONE in types:
        raise ValueError("allowed_types must be a non-empty subset of I, II, III, IV")
    seen: set[str] = set()
    out = []
    for i, target in enumerate(targets):
        if target.id in seen:
            raise GenerationError(f"duplicate target id '{target.id}'")
        seen.add(target.id)
        rng = derive_rng(seed, stream, i)
        if rng.random() < incongruent_fraction:
            gen_type = types[int(rng.integers(len(types)))]
            out.append(generate_incongruent(target, pool, gen_type, rng, cross_category))
        else:
            out.append(congruent_sample(target))
    return out


def generate_splits(split: DatasetSplit, incongruent_fraction: float = 0.5,
                    allowed_types: Iterable[GenType | str] = DEFAULT_TYPES,
                    seed: int = 0, cross_category: bool = False) -> dict[str, list[LabeledSample]]:
    types = list(allowed_types)
    return {
        name: build_dataset(getattr(split, name), split.pool, incongruent_fraction, types, seed, stream=j,
                            cross_category=cross_category)
        for j, name in enumerate(("train", "dev", "test"), start=1)
    }


def write_samples(samples: Iterable[LabeledSample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(json.dumps(s.to_record(), ensure_ascii=False, sort_keys=True) + "\n")


def read_samples(path: str | Path) -> list[LabeledSample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(LabeledSample.from_record(json.loads(line)))
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from None
    return out
