"""Per-segment incongruity reports for unseen articles or comment threads."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .corpus import RawArticle, clean_text, segment_article, tokenize
from .graph import build_graph
from .model import BGHDE
from .synthgen import LabeledSample
from .textenc import Vocabulary

THRESHOLD = 0.5


class InputError(ValueError):
    pass


@dataclass
class SegmentVerdict:
    index: int
    weight: float
    verdict: str
    text: str


@dataclass
class PredictionReport:
    headline: str
    doc_prob: float
    segments: list[SegmentVerdict] = field(default_factory=list)

    @property
    def doc_verdict(self) -> str:
        return "incongruent" if self.doc_prob >= THRESHOLD else "congruent"

    def to_dict(self) -> dict:
        return {
            "headline": self.headline,
            "doc_prob": self.doc_prob,
            "doc_verdict": self.doc_verdict,
            "segments": [vars(s) for s in self.segments],
        }

    def to_text(self) -> str:
        lines = [f"headline: {self.headline}",
                 f"document incongruity probability: {self.doc_prob:.4f} ({self.doc_verdict})",
                 f"{'#':>3}  {'weight':>6}  {'verdict':<11}  text"]
        for s in self.segments:
            text = s.text if len(s.text) <= 80 else s.text[:77] + "..."
            lines.append(f"{s.index:>3}  {s.weight:>6.4f}  {s.verdict:<11}  {text}")
        return "\n".join(lines)


def _report(model: BGHDE, vocab: Vocabulary, headline_text: str, head_tokens: list[str],
            segments: list[list[str]], texts: list[str]) -> PredictionReport:
    if not head_tokens:
        raise InputError("headline (or anchor) text is empty after cleaning")
    if len(segments) < 2:
        raise InputError(f"need at least 2 segments, got {len(segments)}; "
                         "supply a longer body (7+ sentences) or more segments")
    sample = LabeledSample("input", head_tokens, segments, [0] * len(segments), 0)
    out = model.predict_graph(build_graph(sample, vocab, model.config.token_cap))
    verdicts = [SegmentVerdict(i, float(w), "incongruent" if w < THRESHOLD else "congruent", t)
                for i, (w, t) in enumerate(zip(out.edge_weights, texts))]
    return PredictionReport(headline_text, float(out.doc_prob[0]), verdicts)


def predict_article(model: BGHDE, vocab: Vocabulary, headline: str, body: str) -> PredictionReport:
    """Segment ``body`` into paragraphs and score each against ``headline``."""
    seg = segment_article(RawArticle("input", headline, body))
    texts = [" ".join(p) for p in seg.paragraphs]
    return _report(model, vocab, headline, seg.headline_tokens, seg.paragraphs, texts)


def predict_segments(model: BGHDE, vocab: Vocabulary, anchor: str, segments: Sequence[str]) -> PredictionReport:
    """Score free-text segments (e.g. reader comments), one paragraph node each."""
    toks = [tokenize(clean_text(s)) for s in segments]
    for i, t in enumerate(toks):
        if not t:
            raise InputError(f"segment {i} is empty after cleaning")
    return _report(model, vocab, anchor, tokenize(clean_text(anchor)), toks, list(segments))
