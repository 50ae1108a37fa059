"""Joint document/edge objective, step-decay Adam training and gradient checking."""
from __future__ import annotations

import copy
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .evaluation import compute_metrics
from .graph import GraphBatch, NewsGraph, batch_graphs, build_graph
from .model import BGHDE, ModelConfig
from .synthgen import derive_rng
from .textenc import Vocabulary

log = logging.getLogger(__name__)

PROB_CLAMP = 1e-7


class TrainingAborted(RuntimeError):
    pass


@dataclass
class TrainConfig:
    lr0: float = 1e-3
    decay_factor: float = 0.1
    decay_every: int = 3
    batch_size: int = 120
    grad_clip: float = 1.0
    clip_mode: str = "norm"          # "norm": global L2 norm, "value": per element
    epochs: int = 9
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.lr0 <= 0 or self.batch_size < 1 or self.grad_clip <= 0 or self.epochs < 1:
            raise ValueError("lr0, batch_size, grad_clip and epochs must be positive")
        if not 0 < self.decay_factor <= 1 or self.decay_every < 1:
            raise ValueError("decay_factor must be in (0, 1] and decay_every >= 1")
        if self.clip_mode not in ("norm", "value"):
            raise ValueError("clip_mode must be 'norm' or 'value'")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    doc: float
    edge: float


def _bce(probs, labels) -> float:
    p = np.clip(np.asarray(probs, dtype=np.float64), PROB_CLAMP, 1.0 - PROB_CLAMP)
    y = np.asarray(labels, dtype=np.float64)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def total_loss(doc_probs, doc_labels, edge_weights, edge_congruity, lam: float) -> LossBreakdown:
    """Mean document BCE plus ``lam`` times mean edge BCE against congruity labels."""
    doc = _bce(doc_probs, doc_labels)
    edge = _bce(edge_weights, edge_congruity) if len(edge_weights) else 0.0
    return LossBreakdown(doc + lam * edge, doc, edge)


def loss_gradients(doc_probs, doc_labels, edge_weights, edge_congruity, lam: float):
    """Derivatives of :func:`total_loss` w.r.t. the document and edge logits."""
    def grad(p, y, scale):
        p = np.asarray(p)
        inside = (p > PROB_CLAMP) & (p < 1.0 - PROB_CLAMP)
        return (scale * inside * (p - np.asarray(y, dtype=p.dtype)) / max(len(p), 1)).astype(p.dtype)
    return grad(doc_probs, doc_labels, 1.0), grad(edge_weights, edge_congruity, lam)


def lr_at(epoch: int, config: TrainConfig) -> float:
    if epoch < 0:
        raise ValueError("epoch must be non-negative")
    # dividing by 10 ** k rather than multiplying by 0.1 ** k lands exactly on 1e-4, 1e-5, ...
    return config.lr0 / (1.0 / config.decay_factor) ** (epoch // config.decay_every)


def global_norm(grads: dict[str, np.ndarray]) -> float:
    return math.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads.values()))


def clip_gradients(grads: dict[str, np.ndarray], threshold: float, mode: str = "norm"):
    """Returns ``(clipped, unclipped_norm, scale)``; ``scale`` is 1.0 for value clipping."""
    norm = global_norm(grads)
    if mode == "value":
        return {k: np.clip(g, -threshold, threshold) for k, g in grads.items()}, norm, 1.0
    if norm > threshold:
        scale = threshold / norm
        return {k: (g * scale).astype(g.dtype) for k, g in grads.items()}, norm, scale
    return grads, norm, 1.0


class Adam:
    def __init__(self, params: dict[str, np.ndarray], beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray], lr: float) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for k, p in params.items():
            g = grads.get(k)
            if g is None:
                continue
            m, v = self.m[k], self.v[k]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= (lr * (m / c1) / (np.sqrt(v / c2) + self.eps)).astype(p.dtype)

    def state_dict(self) -> dict:
        return {"t": self.t, "m": self.m, "v": self.v}


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    steps: int
    train_loss: float
    train_doc_loss: float
    train_edge_loss: float
    val_loss: float
    val_acc_doc: float
    val_acc_para: float
    val_auc: float
    wall_time: float


@dataclass
class TrainHistory:
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = -1
    steps: int = 0
    step_grad_norms: list[float] = field(default_factory=list)

    @property
    def learning_rates(self) -> list[float]:
        return [e.lr for e in self.epochs]

    def write(self, path: str | Path) -> None:
        """One JSON record per epoch, ready for plotting loss/accuracy curves."""
        with open(path, "w", encoding="utf-8") as fh:
            for e in self.epochs:
                fh.write(json.dumps({**asdict(e), "best": e.epoch == self.best_epoch}) + "\n")

    @classmethod
    def read(cls, path: str | Path) -> "TrainHistory":
        hist = cls()
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                rec = json.loads(line)
                if rec.pop("best", False):
                    hist.best_epoch = rec["epoch"]
                hist.epochs.append(EpochRecord(**rec))
        return hist


@dataclass
class TrainResult:
    model: BGHDE
    history: TrainHistory
    optimizer: Adam


def _batches(graphs: Sequence[NewsGraph], size: int) -> list[GraphBatch]:
    return [batch_graphs(graphs[i:i + size]) for i in range(0, len(graphs), size)]


def evaluate_loss(model: BGHDE, graphs: Sequence[NewsGraph], batch_size: int):
    """Loss and metrics over a dataset (no parameter updates)."""
    probs, weights, labels, congr = [], [], [], []
    for batch in _batches(graphs, batch_size):
        out = model.forward(batch)
        probs.append(out.doc_prob)
        weights.append(out.edge_weights)
        labels.append(batch.doc_labels)
        congr.append(batch.edge_congruity)
    probs, weights = np.concatenate(probs), np.concatenate(weights)
    labels, congr = np.concatenate(labels), np.concatenate(congr)
    loss = total_loss(probs, labels, weights, congr, model.config.edge_loss_weight)
    return loss, compute_metrics(probs, labels, weights, congr)


def train(train_samples: Sequence, dev_samples: Sequence, vocab: Vocabulary, embeddings: np.ndarray,
          model_config: ModelConfig | None = None, train_config: TrainConfig | None = None,
          on_epoch: Callable[[EpochRecord], None] | None = None) -> TrainResult:
    """Train on ``train_samples`` and keep the epoch with the best dev document accuracy.

    Ties go to the lower dev loss, then to the earlier epoch.  ``vocab`` must
    have been built from the training split alone.
    """
    mcfg = model_config or ModelConfig()
    tcfg = train_config or TrainConfig()
    if not train_samples or not dev_samples:
        raise ValueError("train and dev splits must be non-empty")
    train_graphs = [build_graph(s, vocab, mcfg.token_cap) for s in train_samples]
    dev_graphs = [build_graph(s, vocab, mcfg.token_cap) for s in dev_samples]

    model = BGHDE(mcfg, embeddings, seed=tcfg.seed)
    opt = Adam(model.params, tcfg.beta1, tcfg.beta2, tcfg.adam_eps)
    lam = mcfg.edge_loss_weight
    history = TrainHistory()
    best_key, best_params = None, None

    for epoch in range(tcfg.epochs):
        t0 = time.perf_counter()
        lr = lr_at(epoch, tcfg)
        order = derive_rng(tcfg.seed, 1, epoch).permutation(len(train_graphs))
        drop_rng = derive_rng(tcfg.seed, 2, epoch)
        sums = np.zeros(3)
        n_seen = 0
        steps = 0
        for b, start in enumerate(range(0, len(order), tcfg.batch_size)):
            batch = batch_graphs([train_graphs[i] for i in order[start:start + tcfg.batch_size]])
            out, cache = model.forward(batch, train=True, rng=drop_rng, keep_cache=True)
            loss = total_loss(out.doc_prob, batch.doc_labels, out.edge_weights, batch.edge_congruity, lam)
            if not math.isfinite(loss.total):
                raise TrainingAborted(f"non-finite loss at epoch {epoch}, batch {b}")
            d_doc, d_edge = loss_gradients(out.doc_prob, batch.doc_labels, out.edge_weights,
                                           batch.edge_congruity, lam)
            grads = model.backward(cache, d_doc, d_edge)
            grads, norm, _ = clip_gradients(grads, tcfg.grad_clip, tcfg.clip_mode)
            if not math.isfinite(norm):
                raise TrainingAborted(f"non-finite gradient at epoch {epoch}, batch {b}")
            opt.step(model.params, grads, lr)
            history.step_grad_norms.append(norm)
            steps += 1
            g = batch.num_graphs
            sums += g * np.array([loss.total, loss.doc, loss.edge])
            n_seen += g
        history.steps += steps

        val_loss, val = evaluate_loss(model, dev_graphs, tcfg.batch_size)
        rec = EpochRecord(epoch, lr, steps, *(sums / n_seen).tolist(), val_loss.total, val.acc_doc,
                          val.acc_para, val.auc, time.perf_counter() - t0)
        history.epochs.append(rec)
        log.info("epoch %d lr %.1e loss %.4f val_loss %.4f acc_doc %.4f acc_para %.4f auc %.4f",
                 epoch, lr, rec.train_loss, rec.val_loss, rec.val_acc_doc, rec.val_acc_para, rec.val_auc)
        if on_epoch is not None:
            on_epoch(rec)
        key = (val.acc_doc, -val_loss.total)
        if best_key is None or key > best_key:
            best_key = key
            best_params = copy.deepcopy(model.params)
            history.best_epoch = epoch

    model.params = best_params
    return TrainResult(model, history, opt)


# ---------------------------------------------------------------------------
# gradient checking


@dataclass
class GradCheckResult:
    max_rel_error: float
    per_group: dict[str, float]
    checked: int


def micro_config(**overrides) -> ModelConfig:
    cfg = dict(embed_dim=5, word_gru_hidden=6, para_bigru_hidden=3, gnn_layers=3, gnn_hidden=5,
               fc_dims=(6, 4), edge_scorer_hidden=5, dtype="float64")
    cfg.update(overrides)
    return ModelConfig(**cfg)


def model_loss(model: BGHDE, batch: GraphBatch, lam: float) -> float:
    out = model.forward(batch)
    return total_loss(out.doc_prob, batch.doc_labels, out.edge_weights, batch.edge_congruity, lam).total


def analytic_gradients(model: BGHDE, batch: GraphBatch, lam: float) -> dict[str, np.ndarray]:
    out, cache = model.forward(batch, keep_cache=True)
    d_doc, d_edge = loss_gradients(out.doc_prob, batch.doc_labels, out.edge_weights, batch.edge_congruity, lam)
    grads = model.backward(cache, d_doc, d_edge)
    return {k: grads.get(k, np.zeros_like(v)) for k, v in model.params.items()}


def check_gradients(model: BGHDE, batch: GraphBatch, lam: float, step: float = 1e-5,
                    floor: float = 1e-6) -> GradCheckResult:
    """Compare backprop against central finite differences on every parameter entry.

    The relative error of one entry is ``|a - n| / max(|a|, |n|, floor)``.
    Run on a float64 model.
    """
    if model.dtype != np.float64:
        raise ValueError("gradient checking needs a float64 model")
    grads = analytic_gradients(model, batch, lam)
    per_group, checked = {}, 0
    for name, p in model.params.items():
        numeric = np.zeros_like(p)
        flat, nflat = p.reshape(-1), numeric.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = model_loss(model, batch, lam)
            flat[i] = orig - step
            down = model_loss(model, batch, lam)
            flat[i] = orig
            nflat[i] = (up - down) / (2.0 * step)
        a = grads[name]
        rel = np.abs(a - numeric) / np.maximum(np.maximum(np.abs(a), np.abs(numeric)), floor)
        per_group[name] = float(rel.max())
        checked += p.size
    return GradCheckResult(max(per_group.values()), per_group, checked)
