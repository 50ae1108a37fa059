"""Star graphs (headline node linked to every paragraph node) and disjoint-union batching."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .textenc import Vocabulary

DEFAULT_TOKEN_CAP = 500


class GraphError(ValueError):
    pass


@dataclass
class NewsGraph:
    headline_ids: np.ndarray
    paragraph_ids: list[np.ndarray]
    edge_congruity: np.ndarray   # 1 = congruent paragraph
    doc_label: int
    id: str = ""

    @property
    def num_paragraphs(self) -> int:
        return len(self.paragraph_ids)

    @property
    def num_nodes(self) -> int:
        return self.num_paragraphs + 1

    @property
    def edges(self) -> np.ndarray:
        """``(k, 2)`` local node pairs; node 0 is the headline."""
        k = self.num_paragraphs
        return np.stack([np.zeros(k, dtype=np.int64), np.arange(1, k + 1)], axis=1)

    @property
    def para_labels(self) -> np.ndarray:
        return 1 - self.edge_congruity

    def dump(self, path: str | Path) -> None:
        """Write the graph as one JSON record for inspection."""
        rec = {
            "id": self.id,
            "nodes": [self.headline_ids.tolist()] + [p.tolist() for p in self.paragraph_ids],
            "edges": self.edges.tolist(),
            "edge_congruity": self.edge_congruity.tolist(),
            "doc_label": self.doc_label,
        }
        Path(path).write_text(json.dumps(rec) + "\n", encoding="utf-8")


def _payload(vocab: Vocabulary, tokens: Sequence[str], cap: int) -> np.ndarray:
    ids = vocab.encode(tokens[:cap])
    if ids.size == 0:
        raise GraphError("node with no tokens")
    return ids


def build_graph(sample, vocab: Vocabulary, token_cap: int = DEFAULT_TOKEN_CAP) -> NewsGraph:
    """Map a labeled sample onto a star graph with congruity edge labels."""
    if len(sample.paragraphs) < 2:
        raise GraphError(f"{sample.id}: needs at least 2 paragraphs, has {len(sample.paragraphs)}")
    congruity = 1 - np.asarray(sample.para_labels, dtype=np.int64)
    return NewsGraph(
        _payload(vocab, sample.headline_tokens, token_cap),
        [_payload(vocab, p, token_cap) for p in sample.paragraphs],
        congruity,
        int(sample.doc_label),
        sample.id,
    )


@dataclass
class GraphBatch:
    """Disjoint union of star graphs.

    Nodes of graph ``g`` occupy ``node_ptr[g]:node_ptr[g + 1]``; the first is
    its headline.  Edges are stored in graph order as (headline, paragraph)
    global node indices.
    """
    node_ids: list[np.ndarray]
    edges: np.ndarray
    node_ptr: np.ndarray
    edge_ptr: np.ndarray
    doc_labels: np.ndarray
    edge_congruity: np.ndarray
    graph_ids: list[str]

    @property
    def num_graphs(self) -> int:
        return len(self.node_ptr) - 1

    @property
    def num_nodes(self) -> int:
        return int(self.node_ptr[-1])

    @property
    def membership(self) -> np.ndarray:
        return np.repeat(np.arange(self.num_graphs), np.diff(self.node_ptr))

    @property
    def headline_nodes(self) -> np.ndarray:
        return self.node_ptr[:-1]

    @property
    def paragraph_counts(self) -> np.ndarray:
        return np.diff(self.edge_ptr)


def batch_graphs(graphs: Sequence[NewsGraph]) -> GraphBatch:
    if not graphs:
        raise GraphError("cannot batch an empty graph sequence")
    sizes = np.array([g.num_nodes for g in graphs])
    node_ptr = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    edge_ptr = np.concatenate([[0], np.cumsum(sizes - 1)]).astype(np.int64)
    node_ids: list[np.ndarray] = []
    for g in graphs:
        node_ids.append(g.headline_ids)
        node_ids.extend(g.paragraph_ids)
    edges = np.concatenate([g.edges + off for g, off in zip(graphs, node_ptr[:-1])])
    return GraphBatch(
        node_ids,
        edges,
        node_ptr,
        edge_ptr,
        np.array([g.doc_label for g in graphs], dtype=np.int64),
        np.concatenate([g.edge_congruity for g in graphs]).astype(np.int64),
        [g.id for g in graphs],
    )


def unbatch(batch: GraphBatch) -> list[NewsGraph]:
    out = []
    for g in range(batch.num_graphs):
        lo, hi = batch.node_ptr[g], batch.node_ptr[g + 1]
        elo, ehi = batch.edge_ptr[g], batch.edge_ptr[g + 1]
        out.append(NewsGraph(batch.node_ids[lo], list(batch.node_ids[lo + 1:hi]),
                             batch.edge_congruity[elo:ehi].copy(), int(batch.doc_labels[g]),
                             batch.graph_ids[g]))
    return out
