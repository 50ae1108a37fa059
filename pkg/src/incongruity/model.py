"""Graph-based hierarchical dual encoder with hand-written backpropagation.

Pipeline for a :class:`~incongruity.graph.GraphBatch`:

1. a word-level GRU encodes the headline and every paragraph (final state);
2. a bidirectional GRU over each article's paragraph vectors adds context;
3. an edge scorer maps (headline, paragraph) pairs to weights in (0, 1);
4. edge-weighted GCN layers propagate node features over the star graph;
5. a gated fusion of the headline node (local) and the node mean (global)
   feeds an MLP that outputs the document incongruity probability.

Parameters live in a flat ``dict[str, ndarray]``; :meth:`BGHDE.backward`
returns gradients keyed the same way.  The embedding table is frozen and is
not part of ``params``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from typing import Sequence

import numpy as np

from . import kernels
from .graph import GraphBatch, NewsGraph, batch_graphs


@dataclass
class ModelConfig:
    embed_dim: int = 300
    word_gru_hidden: int = 200
    para_bigru_hidden: int = 100
    gnn_layers: int = 3
    gnn_hidden: int = 200
    fc_dims: tuple[int, ...] = (200, 200, 100)
    edge_scorer_hidden: int = 200
    edge_loss_weight: float = 0.1
    dropout: float = 0.0
    token_cap: int = 500
    shared_word_encoder: bool = True
    edge_floor: float = 1e-6
    dtype: str = "float32"
    debug: bool = False

    def __post_init__(self):
        self.fc_dims = tuple(int(d) for d in self.fc_dims)
        dims = [self.embed_dim, self.word_gru_hidden, self.para_bigru_hidden, self.gnn_layers,
                self.gnn_hidden, self.edge_scorer_hidden, self.token_cap, *self.fc_dims]
        if any(d <= 0 for d in dims):
            raise ValueError("all model dimensions must be positive")
        if self.word_gru_hidden != 2 * self.para_bigru_hidden:
            raise ValueError("word_gru_hidden must equal 2 * para_bigru_hidden "
                             "(headline and paragraph nodes share one feature space)")
        if self.edge_loss_weight < 0:
            raise ValueError("edge_loss_weight must be non-negative")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be float32 or float64")

    @property
    def node_dim(self) -> int:
        return self.word_gru_hidden

    def to_dict(self) -> dict:
        d = asdict(self)
        d["fc_dims"] = list(self.fc_dims)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class ForwardOutput:
    doc_prob: np.ndarray
    edge_weights: np.ndarray
    node_features: np.ndarray
    doc_logit: np.ndarray = field(repr=False, default=None)
    edge_logit: np.ndarray = field(repr=False, default=None)


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _prob(x):
    # keep probabilities strictly inside (0, 1) at the working precision
    eps = np.finfo(x.dtype).eps
    return np.clip(_sigmoid(x), eps, 1.0 - eps)


def _uniform(rng, shape, bound, dtype):
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def init_params(config: ModelConfig, seed: int = 0) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x6768]))
    dt = np.dtype(config.dtype)
    p: dict[str, np.ndarray] = {}

    def gru(prefix, n_in, n_hid):
        b = 1.0 / np.sqrt(n_hid)
        p[f"{prefix}.w_ih"] = _uniform(rng, (3 * n_hid, n_in), b, dt)
        p[f"{prefix}.w_hh"] = _uniform(rng, (3 * n_hid, n_hid), b, dt)
        p[f"{prefix}.b_ih"] = _uniform(rng, (3 * n_hid,), b, dt)
        p[f"{prefix}.b_hh"] = _uniform(rng, (3 * n_hid,), b, dt)

    def linear(prefix, n_in, n_out):
        b = 1.0 / np.sqrt(n_in)
        p[f"{prefix}.w"] = _uniform(rng, (n_out, n_in), b, dt)
        p[f"{prefix}.b"] = _uniform(rng, (n_out,), b, dt)

    D = config.node_dim
    gru("word_gru", config.embed_dim, config.word_gru_hidden)
    if not config.shared_word_encoder:
        gru("head_gru", config.embed_dim, config.word_gru_hidden)
    gru("para_fwd", D, config.para_bigru_hidden)
    gru("para_bwd", D, config.para_bigru_hidden)

    S = config.edge_scorer_hidden
    linear("edge", 4 * D, S)
    p["edge.v"] = _uniform(rng, (S,), 1.0 / np.sqrt(S), dt)

    n_in = D
    for layer in range(config.gnn_layers):
        bound = np.sqrt(6.0 / (n_in + config.gnn_hidden))
        p[f"gcn{layer}.w"] = _uniform(rng, (n_in, config.gnn_hidden), bound, dt)
        p[f"gcn{layer}.b"] = np.zeros(config.gnn_hidden, dtype=dt)
        n_in = config.gnn_hidden

    F = config.gnn_hidden
    linear("gate", 2 * F, F)
    n_in = F
    for i, d in enumerate(config.fc_dims):
        linear(f"fc{i}", n_in, d)
        n_in = d
    linear("out", n_in, 1)
    return p


def count_params(params: dict[str, np.ndarray]) -> int:
    """Number of trainable scalars (the frozen embedding table is not included)."""
    return int(sum(v.size for v in params.values()))


def param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    return {k: v.shape for k, v in init_params(config).items()}


# ---------------------------------------------------------------------------
# recurrent layer helpers


def _pad_time_major(seqs: Sequence[np.ndarray], dtype) -> tuple[np.ndarray, np.ndarray]:
    T = max(len(s) for s in seqs)
    ids = np.zeros((T, len(seqs)), dtype=np.int64)
    mask = np.zeros((T, len(seqs)), dtype=dtype)
    for j, s in enumerate(seqs):
        ids[:len(s), j] = s
        mask[:len(s), j] = 1.0
    return ids, mask


def _gru_forward(params, prefix, x, mask):
    gi = x @ params[f"{prefix}.w_ih"].T + params[f"{prefix}.b_ih"]
    hs, r, z, n, ghn = kernels.gru_forward(np.ascontiguousarray(gi), mask,
                                           params[f"{prefix}.w_hh"], params[f"{prefix}.b_hh"])
    return hs, (prefix, x, mask, hs, r, z, n, ghn)


def _gru_backward(params, cache, dhs, grads, need_dx=True):
    prefix, x, mask, hs, r, z, n, ghn = cache
    dgi, dw_hh, db_hh = kernels.gru_backward(np.ascontiguousarray(dhs), mask, params[f"{prefix}.w_hh"],
                                             hs, r, z, n, ghn)
    H3 = dgi.shape[-1]
    flat = dgi.reshape(-1, H3)
    _acc(grads, f"{prefix}.w_ih", flat.T @ x.reshape(-1, x.shape[-1]))
    _acc(grads, f"{prefix}.b_ih", flat.sum(axis=0))
    _acc(grads, f"{prefix}.w_hh", dw_hh)
    _acc(grads, f"{prefix}.b_hh", db_hh)
    return dgi @ params[f"{prefix}.w_ih"] if need_dx else None


def _acc(grads, key, value):
    if key in grads:
        grads[key] = grads[key] + value
    else:
        grads[key] = value


# ---------------------------------------------------------------------------


class BGHDE:
    """The network: frozen embeddings, config and trainable parameters."""

    def __init__(self, config: ModelConfig, embeddings: np.ndarray,
                 params: dict[str, np.ndarray] | None = None, seed: int = 0):
        if embeddings.shape[1] != config.embed_dim:
            raise ValueError(f"embedding dim {embeddings.shape[1]} != config.embed_dim {config.embed_dim}")
        self.config = config
        self.dtype = np.dtype(config.dtype)
        self.embeddings = np.ascontiguousarray(embeddings, dtype=self.dtype)
        self.params = init_params(config, seed) if params is None else {
            k: np.asarray(v, dtype=self.dtype) for k, v in params.items()}

    # -- single-graph entry points ------------------------------------------------

    def encode_words(self, token_ids: Sequence[int], headline: bool = False) -> np.ndarray:
        """Final GRU state for one token sequence."""
        ids = np.asarray(token_ids, dtype=np.int64)
        if ids.size == 0 or not ids.any():
            raise ValueError("encode_words needs a non-empty, non-padding token sequence")
        prefix = "head_gru" if headline and not self.config.shared_word_encoder else "word_gru"
        x = self.embeddings[ids][:, None, :]
        hs, _ = _gru_forward(self.params, prefix, x, np.ones((len(ids), 1), dtype=self.dtype))
        return hs[-1, 0]

    def contextualize_paragraphs(self, para_vectors: np.ndarray) -> np.ndarray:
        """Concatenated forward/backward states, one row per paragraph."""
        v = np.asarray(para_vectors, dtype=self.dtype)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] != self.config.node_dim:
            raise ValueError(f"expected (k, {self.config.node_dim}) paragraph vectors, got {v.shape}")
        ctx, _ = self._bigru_forward(v, np.array([0, len(v)]))
        return ctx

    def score_edges(self, headline_vec: np.ndarray, para_vecs: np.ndarray) -> np.ndarray:
        P = np.atleast_2d(np.asarray(para_vecs, dtype=self.dtype))
        h = np.broadcast_to(np.asarray(headline_vec, dtype=self.dtype), P.shape)
        s, _ = self._edge_forward(h, P)
        return _prob(s)

    def propagate(self, node_feats: np.ndarray, edges: np.ndarray, edge_weights: np.ndarray) -> np.ndarray:
        out, _ = self._gcn_forward(np.asarray(node_feats, dtype=self.dtype), np.asarray(edges),
                                   np.asarray(edge_weights, dtype=self.dtype))
        return out

    def fuse_and_classify(self, headline_node: np.ndarray, all_nodes: np.ndarray) -> float:
        nodes = np.asarray(all_nodes, dtype=self.dtype)
        local = np.asarray(headline_node, dtype=self.dtype)[None, :]
        glob = nodes.mean(axis=0, keepdims=True)
        fused, _ = self._fuse_forward(local, glob)
        logit, _ = self._mlp_forward(fused, None)
        return float(_prob(logit)[0])

    def predict_graph(self, graph: NewsGraph) -> ForwardOutput:
        return self.forward(batch_graphs([graph]))

    # -- batched forward / backward -------------------------------------------------

    def forward(self, batch: GraphBatch, train: bool = False,
                rng: np.random.Generator | None = None, keep_cache: bool = False):
        p, cfg = self.params, self.config
        cache: dict = {}
        N = batch.num_nodes
        heads = batch.headline_nodes
        src, dst = batch.edges[:, 0], batch.edges[:, 1]

        # 1. word-level encoding of every node payload
        capped = [ids[:cfg.token_cap] for ids in batch.node_ids]
        if cfg.shared_word_encoder:
            groups = [("word_gru", np.arange(N))]
        else:
            is_head = np.zeros(N, dtype=bool)
            is_head[heads] = True
            groups = [("head_gru", np.flatnonzero(is_head)), ("word_gru", np.flatnonzero(~is_head))]
        enc = np.zeros((N, cfg.word_gru_hidden), dtype=self.dtype)
        cache["word"] = []
        for prefix, nodes in groups:
            ids, mask = _pad_time_major([capped[i] for i in nodes], self.dtype)
            x = self.embeddings[ids]
            hs, c = _gru_forward(p, prefix, x, mask)
            enc[nodes] = hs[-1]
            cache["word"].append((nodes, c))

        # 2. paragraph context
        x0 = enc.copy()
        ctx, cache["bigru"] = self._bigru_forward(enc[dst], batch.edge_ptr)
        x0[dst] = ctx

        # 3. edge scoring
        s, cache["edge"] = self._edge_forward(x0[src], x0[dst])
        w = _prob(s)

        # 4. propagation
        hn, cache["gcn"] = self._gcn_forward(x0, batch.edges, w)

        # 5. fusion and classification
        sizes = np.diff(batch.node_ptr).astype(self.dtype)
        local = hn[heads]
        glob = np.add.reduceat(hn, batch.node_ptr[:-1], axis=0) / sizes[:, None]
        fused, cache["fuse"] = self._fuse_forward(local, glob)
        logit, cache["mlp"] = self._mlp_forward(fused, rng if train and cfg.dropout > 0 else None)
        out = ForwardOutput(_prob(logit), w, hn, logit, s)
        if cfg.debug:
            for name in ("doc_prob", "edge_weights", "node_features"):
                if not np.isfinite(getattr(out, name)).all():
                    raise FloatingPointError(f"non-finite values in {name}")
        if keep_cache:
            cache["batch"] = batch
            cache["sizes"] = sizes
            return out, cache
        return out

    def backward(self, cache: dict, d_doc_logit: np.ndarray, d_edge_logit: np.ndarray) -> dict[str, np.ndarray]:
        """Gradients of a scalar loss given its derivatives w.r.t. both logit vectors."""
        p = self.params
        grads: dict[str, np.ndarray] = {}
        batch: GraphBatch = cache["batch"]
        heads = batch.headline_nodes
        src, dst = batch.edges[:, 0], batch.edges[:, 1]

        dfused = self._mlp_backward(cache["mlp"], d_doc_logit.astype(self.dtype), grads)
        dlocal, dglob = self._fuse_backward(cache["fuse"], dfused, grads)
        sizes = cache["sizes"]
        membership = batch.membership
        dhn = (dglob / sizes[:, None])[membership]
        np.add.at(dhn, heads, dlocal)

        dx0, dw = self._gcn_backward(cache["gcn"], dhn, grads)
        weights = cache["gcn"]["w"]
        ds = d_edge_logit.astype(self.dtype) + dw * weights * (1.0 - weights)
        dh, dpara = self._edge_backward(cache["edge"], ds, grads)
        np.add.at(dx0, src, dh)
        dx0[dst] += dpara

        denc = dx0.copy()
        denc[dst] = 0.0
        denc[dst] += self._bigru_backward(cache["bigru"], dx0[dst], grads)

        for nodes, c in cache["word"]:
            T = c[1].shape[0]
            dhs = np.zeros((T, len(nodes), self.config.word_gru_hidden), dtype=self.dtype)
            dhs[-1] = denc[nodes]
            _gru_backward(p, c, dhs, grads, need_dx=False)
        return grads

    # -- components -------------------------------------------------------------------

    def _bigru_forward(self, para_vecs: np.ndarray, edge_ptr: np.ndarray):
        counts = np.diff(edge_ptr)
        G, K = len(counts), int(counts.max())
        P = len(para_vecs)
        padded = np.vstack([para_vecs, np.zeros((1, para_vecs.shape[1]), dtype=self.dtype)])
        idx_f = np.full((K, G), P, dtype=np.int64)
        idx_b = np.full((K, G), P, dtype=np.int64)
        mask = np.zeros((K, G), dtype=self.dtype)
        for g in range(G):
            k, off = counts[g], edge_ptr[g]
            idx_f[:k, g] = off + np.arange(k)
            idx_b[:k, g] = off + np.arange(k)[::-1]
            mask[:k, g] = 1.0
        hf, cf = _gru_forward(self.params, "para_fwd", padded[idx_f], mask)
        hb, cb = _gru_forward(self.params, "para_bwd", padded[idx_b], mask)
        H = self.config.para_bigru_hidden
        ctx = np.zeros((P + 1, 2 * H), dtype=self.dtype)
        # scatter time-major states back to paragraph rows (padding lands in the sentinel row)
        ctx[idx_f.ravel(), :H] = hf.reshape(-1, H)
        ctx[idx_b.ravel(), H:] = hb.reshape(-1, H)
        return ctx[:P], (idx_f, idx_b, cf, cb, P)

    def _bigru_backward(self, cache, dctx, grads):
        idx_f, idx_b, cf, cb, P = cache
        H = self.config.para_bigru_hidden
        dctx = np.vstack([dctx, np.zeros((1, 2 * H), dtype=self.dtype)])
        K, G = idx_f.shape
        dhf = dctx[idx_f, :H] * cf[2][:, :, None]
        dhb = dctx[idx_b, H:] * cb[2][:, :, None]
        dxf = _gru_backward(self.params, cf, dhf, grads)
        dxb = _gru_backward(self.params, cb, dhb, grads)
        dpara = np.zeros((P + 1, dxf.shape[-1]), dtype=self.dtype)
        np.add.at(dpara, idx_f.ravel(), dxf.reshape(-1, dxf.shape[-1]))
        np.add.at(dpara, idx_b.ravel(), dxb.reshape(-1, dxb.shape[-1]))
        return dpara[:P]

    def _edge_forward(self, h, q):
        p = self.params
        feats = np.concatenate([h, q, h * q, np.abs(h - q)], axis=1)
        a = feats @ p["edge.w"].T + p["edge.b"]
        r = np.maximum(a, 0.0)
        s = r @ p["edge.v"]
        return s, (h, q, feats, a, r)

    def _edge_backward(self, cache, ds, grads):
        p = self.params
        h, q, feats, a, r = cache
        _acc(grads, "edge.v", r.T @ ds)
        da = (ds[:, None] * p["edge.v"][None, :]) * (a > 0)
        _acc(grads, "edge.w", da.T @ feats)
        _acc(grads, "edge.b", da.sum(axis=0))
        df = da @ p["edge.w"]
        D = h.shape[1]
        d_h, d_q, d_prod, d_abs = df[:, :D], df[:, D:2 * D], df[:, 2 * D:3 * D], df[:, 3 * D:]
        sgn = np.sign(h - q)
        dh = d_h + d_prod * q + d_abs * sgn
        dq = d_q + d_prod * h - d_abs * sgn
        return dh, dq

    def _gcn_forward(self, x, edges, w):
        cfg, p = self.config, self.params
        src, dst = edges[:, 0], edges[:, 1]
        N = x.shape[0]
        wu = np.maximum(w, cfg.edge_floor).astype(self.dtype)
        deg = (1.0 + np.bincount(src, wu, minlength=N) + np.bincount(dst, wu, minlength=N)).astype(self.dtype)
        inv_sqrt = 1.0 / np.sqrt(deg)
        ce = (wu * inv_sqrt[src] * inv_sqrt[dst]).astype(self.dtype)
        cs = (1.0 / deg).astype(self.dtype)
        h = np.ascontiguousarray(x)
        layers = []
        for layer in range(cfg.gnn_layers):
            m = kernels.aggregate(h, src, dst, ce, cs)
            y = m @ p[f"gcn{layer}.w"] + p[f"gcn{layer}.b"]
            layers.append((h, m, y))
            h = np.ascontiguousarray(np.maximum(y, 0.0))
        return h, {"w": w, "wu": wu, "deg": deg, "ce": ce, "cs": cs, "src": src, "dst": dst,
                   "layers": layers}

    def _gcn_backward(self, cache, dh, grads):
        p, cfg = self.params, self.config
        src, dst, ce, cs, deg = cache["src"], cache["dst"], cache["ce"], cache["cs"], cache["deg"]
        dce = np.zeros_like(ce)
        dcs = np.zeros_like(cs)
        for layer in range(cfg.gnn_layers - 1, -1, -1):
            h, m, y = cache["layers"][layer]
            dy = dh * (y > 0)
            _acc(grads, f"gcn{layer}.w", m.T @ dy)
            _acc(grads, f"gcn{layer}.b", dy.sum(axis=0))
            dm = np.ascontiguousarray(dy @ p[f"gcn{layer}.w"].T)
            g_edge, g_self = kernels.pair_products(dm, h, src, dst)
            dce += g_edge
            dcs += g_self
            dh = kernels.aggregate(dm, src, dst, ce, cs)
        ddeg = -dcs / deg ** 2
        half = -0.5 * dce * ce
        ddeg += np.bincount(src, half / deg[src], minlength=len(deg)) + np.bincount(
            dst, half / deg[dst], minlength=len(deg))
        ddeg = ddeg.astype(self.dtype)
        dwu = dce / np.sqrt(deg[src] * deg[dst]) + ddeg[src] + ddeg[dst]
        dw = (dwu * (cache["w"] > cfg.edge_floor)).astype(self.dtype)
        return dh, dw

    def _fuse_forward(self, local, glob):
        p = self.params
        u = np.concatenate([local, glob], axis=1)
        g = _sigmoid(u @ p["gate.w"].T + p["gate.b"])
        return g * local + (1.0 - g) * glob, (local, glob, u, g)

    def _fuse_backward(self, cache, dfused, grads):
        p = self.params
        local, glob, u, g = cache
        dg = dfused * (local - glob)
        dpre = dg * g * (1.0 - g)
        _acc(grads, "gate.w", dpre.T @ u)
        _acc(grads, "gate.b", dpre.sum(axis=0))
        du = dpre @ p["gate.w"]
        F = local.shape[1]
        return dfused * g + du[:, :F], dfused * (1.0 - g) + du[:, F:]

    def _mlp_forward(self, x, rng):
        p, cfg = self.params, self.config
        steps = []
        for i in range(len(cfg.fc_dims)):
            y = x @ p[f"fc{i}.w"].T + p[f"fc{i}.b"]
            out = np.maximum(y, 0.0)
            keep = None
            if rng is not None:
                keep = (rng.random(out.shape) >= cfg.dropout).astype(self.dtype) / (1.0 - cfg.dropout)
                out = out * keep
            steps.append((x, y, keep))
            x = out
        logit = (x @ p["out.w"].T + p["out.b"])[:, 0]
        return logit, (steps, x)

    def _mlp_backward(self, cache, dlogit, grads):
        p = self.params
        steps, last = cache
        _acc(grads, "out.w", dlogit[None, :] @ last)
        _acc(grads, "out.b", np.array([dlogit.sum()], dtype=self.dtype))
        dx = dlogit[:, None] * p["out.w"]
        for i in range(len(steps) - 1, -1, -1):
            x, y, keep = steps[i]
            if keep is not None:
                dx = dx * keep
            dy = dx * (y > 0)
            _acc(grads, f"fc{i}.w", dy.T @ x)
            _acc(grads, f"fc{i}.b", dy.sum(axis=0))
            dx = dy @ p[f"fc{i}.w"]
        return dx
