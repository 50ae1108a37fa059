"""Document/paragraph accuracy, AUC, precision/recall/F1 and tabular reports.

The positive class is *incongruent* (label 1).  A probability exactly at the
threshold counts as a positive prediction.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

REPORT_COLUMNS = ("Dataset", "Size", "Acc(para)", "Acc(doc)", "Precision", "Recall", "F1", "Support")


def confusion_counts(probs, labels, threshold: float = 0.5) -> tuple[int, int, int, int]:
    """(tp, fp, tn, fn) for ``prob >= threshold`` predicted positive."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels).astype(np.int64)
    if probs.size == 0:
        raise ValueError("confusion_counts on empty input")
    if probs.shape != labels.shape:
        raise ValueError("probs and labels differ in shape")
    pred = probs >= threshold
    pos = labels == 1
    return (int(np.sum(pred & pos)), int(np.sum(pred & ~pos)),
            int(np.sum(~pred & ~pos)), int(np.sum(~pred & pos)))


def precision_recall_f1(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


def auc(probs, labels) -> float:
    """Mann-Whitney AUC; ties between a positive and a negative count one half."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels).astype(np.int64)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("auc needs both classes present")
    ranks = rankdata(probs)
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass
class Metrics:
    acc_para: float
    acc_doc: float
    auc: float
    precision: float
    recall: float
    f1: float
    support: tuple[int, int]    # (congruent, incongruent)

    @property
    def size(self) -> int:
        return int(sum(self.support))


def compute_metrics(doc_probs, doc_labels, edge_weights, edge_congruity, threshold: float = 0.5) -> Metrics:
    """Metrics from raw model outputs.

    A paragraph is predicted incongruent iff its edge weight is below the
    threshold; paragraph accuracy is pooled over all paragraphs.
    """
    doc_labels = np.asarray(doc_labels).astype(np.int64)
    tp, fp, tn, fn = confusion_counts(doc_probs, doc_labels, threshold)
    p, r, f = precision_recall_f1(tp, fp, fn)
    edge_weights = np.asarray(edge_weights, dtype=np.float64)
    pred_congruent = edge_weights >= threshold
    acc_para = float(np.mean(pred_congruent == (np.asarray(edge_congruity) == 1))) if edge_weights.size else 0.0
    try:
        a = auc(doc_probs, doc_labels)
    except ValueError:
        a = float("nan")
    n_pos = int(doc_labels.sum())
    return Metrics(acc_para, (tp + tn) / doc_labels.size, a, p, r, f, (doc_labels.size - n_pos, n_pos))


def evaluate(model, graphs: Sequence, batch_size: int = 120, return_outputs: bool = False):
    """Run ``model`` over prebuilt graphs and score its predictions."""
    from .graph import batch_graphs

    if not graphs:
        raise ValueError("evaluate on an empty dataset")
    probs, weights, labels, congr = [], [], [], []
    for i in range(0, len(graphs), batch_size):
        batch = batch_graphs(graphs[i:i + batch_size])
        out = model.forward(batch)
        probs.append(out.doc_prob)
        weights.append(out.edge_weights)
        labels.append(batch.doc_labels)
        congr.append(batch.edge_congruity)
    probs, weights = np.concatenate(probs), np.concatenate(weights)
    labels, congr = np.concatenate(labels), np.concatenate(congr)
    metrics = compute_metrics(probs, labels, weights, congr)
    if return_outputs:
        return metrics, {"doc_prob": probs, "doc_label": labels, "edge_weight": weights, "edge_congruity": congr}
    return metrics


def format_support(support: Sequence[int]) -> str:
    return "[" + " ".join(str(int(s)) for s in support) + "]"


def parse_support(text: str) -> tuple[int, int]:
    a, b = text.strip().strip("[]").split()
    return int(a), int(b)


def report_rows(results: Sequence[tuple[str, Metrics]]) -> list[dict]:
    rows = []
    for name, m in results:
        rows.append({
            "Dataset": name,
            "Size": str(m.size),
            "Acc(para)": f"{m.acc_para:.4f}",
            "Acc(doc)": f"{m.acc_doc:.4f}",
            "Precision": f"{m.precision:.4f}",
            "Recall": f"{m.recall:.4f}",
            "F1": f"{m.f1:.4f}",
            "Support": format_support(m.support),
        })
    return rows


def report(results: Sequence[tuple[str, Metrics]], csv_path: str | Path | None = None) -> str:
    """Render a results table; optionally write CSV plus a JSON sidecar with full precision."""
    if not results:
        raise ValueError("report needs at least one row")
    rows = report_rows(results)
    widths = {c: max(len(c), *(len(r[c]) for r in rows)) for c in REPORT_COLUMNS}
    lines = ["  ".join(c.ljust(widths[c]) for c in REPORT_COLUMNS)]
    lines.append("  ".join("-" * widths[c] for c in REPORT_COLUMNS))
    for r in rows:
        lines.append("  ".join(r[c].ljust(widths[c]) for c in REPORT_COLUMNS))
    if csv_path is not None:
        csv_path = Path(csv_path)
        csv_path.write_text(rows_to_csv(rows), encoding="utf-8")
        full = [{"dataset": name, **asdict(m)} for name, m in results]
        csv_path.with_suffix(".json").write_text(json.dumps(full, indent=2), encoding="utf-8")
    return "\n".join(lines)


def rows_to_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def read_report(path: str | Path) -> list[tuple[str, Metrics]]:
    """Parse a CSV written by :func:`report` (AUC is not part of the table and comes back NaN)."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != REPORT_COLUMNS:
            raise ValueError(f"unexpected report columns {reader.fieldnames}")
        out = []
        for r in reader:
            out.append((r["Dataset"], Metrics(float(r["Acc(para)"]), float(r["Acc(doc)"]), float("nan"),
                                              float(r["Precision"]), float(r["Recall"]), float(r["F1"]),
                                              parse_support(r["Support"]))))
    return out
