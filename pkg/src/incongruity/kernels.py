"""Hot inner loops: gated-recurrence time stepping and sparse graph aggregation.

Every kernel has a loop implementation (compiled with numba when available)
and a vectorized numpy implementation with identical semantics.  The public
names at the bottom dispatch to the compiled loops unless numba is missing or
``INCONGRUITY_NO_NUMBA`` is set.  The recurrence kernels stay on numpy unless
numba was built with SVML vector math.

Recurrent arrays are time-major: ``gi`` is ``(T, S, 3H)`` holding the input
projections for the reset, update and candidate gates in that order, ``mask``
is ``(T, S)`` with 1.0 on real steps and 0.0 on padding.  On padded steps the
hidden state is carried over unchanged, so ``hs[T - 1]`` is every sequence's
final state.
"""
from __future__ import annotations

import numpy as np

from ._accel import HAVE_NUMBA, USING_SVML, njit


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


# ---------------------------------------------------------------------------
# loop implementations


def _gru_forward_loop(gi, mask, w_hh, b_hh):
    T, S, H3 = gi.shape
    H = H3 // 3
    hs = np.zeros((T, S, H), dtype=gi.dtype)
    r = np.zeros((T, S, H), dtype=gi.dtype)
    z = np.zeros((T, S, H), dtype=gi.dtype)
    n = np.zeros((T, S, H), dtype=gi.dtype)
    ghn = np.zeros((T, S, H), dtype=gi.dtype)
    h = np.zeros((S, H), dtype=gi.dtype)
    w_t = np.ascontiguousarray(w_hh.T)
    for t in range(T):
        gh = h @ w_t
        for s in range(S):
            m = mask[t, s]
            for j in range(H):
                rr = 1.0 / (1.0 + np.exp(-(gi[t, s, j] + gh[s, j] + b_hh[j])))
                zz = 1.0 / (1.0 + np.exp(-(gi[t, s, H + j] + gh[s, H + j] + b_hh[H + j])))
                hn = gh[s, 2 * H + j] + b_hh[2 * H + j]
                nn = np.tanh(gi[t, s, 2 * H + j] + rr * hn)
                hnew = (1.0 - zz) * nn + zz * h[s, j]
                r[t, s, j] = rr
                z[t, s, j] = zz
                n[t, s, j] = nn
                ghn[t, s, j] = hn
                hs[t, s, j] = m * hnew + (1.0 - m) * h[s, j]
        h = hs[t].copy()
    return hs, r, z, n, ghn


def _gru_backward_loop(dhs, mask, w_hh, hs, r, z, n, ghn):
    T, S, H = hs.shape
    dgi = np.zeros((T, S, 3 * H), dtype=hs.dtype)
    dw_hh = np.zeros((3 * H, H), dtype=hs.dtype)
    db_hh = np.zeros(3 * H, dtype=hs.dtype)
    dh = np.zeros((S, H), dtype=hs.dtype)
    zero = np.zeros((S, H), dtype=hs.dtype)
    for t in range(T - 1, -1, -1):
        hprev = hs[t - 1] if t > 0 else zero
        dgh = np.zeros((S, 3 * H), dtype=hs.dtype)
        dprev = np.empty((S, H), dtype=hs.dtype)
        for s in range(S):
            m = mask[t, s]
            for j in range(H):
                g = dh[s, j] + dhs[t, s, j]
                dnew = m * g
                rr = r[t, s, j]
                zz = z[t, s, j]
                nn = n[t, s, j]
                dan = dnew * (1.0 - zz) * (1.0 - nn * nn)
                daz = dnew * (hprev[s, j] - nn) * zz * (1.0 - zz)
                dar = dan * ghn[t, s, j] * rr * (1.0 - rr)
                dgi[t, s, j] = dar
                dgi[t, s, H + j] = daz
                dgi[t, s, 2 * H + j] = dan
                dgh[s, j] = dar
                dgh[s, H + j] = daz
                dgh[s, 2 * H + j] = dan * rr
                dprev[s, j] = (1.0 - m) * g + dnew * zz
        dprev += dgh @ w_hh
        dw_hh += np.ascontiguousarray(dgh.T) @ hprev
        db_hh += dgh.sum(axis=0)
        dh = dprev
    return dgi, dw_hh, db_hh


def _aggregate_loop(h, src, dst, coef_edge, coef_self):
    out = np.empty_like(h)
    N, F = h.shape
    for i in range(N):
        c = coef_self[i]
        for f in range(F):
            out[i, f] = c * h[i, f]
    for e in range(src.shape[0]):
        a = src[e]
        b = dst[e]
        c = coef_edge[e]
        for f in range(F):
            out[a, f] += c * h[b, f]
            out[b, f] += c * h[a, f]
    return out


def _pair_products_loop(dm, h, src, dst):
    E = src.shape[0]
    N, F = h.shape
    g_edge = np.zeros(E, dtype=h.dtype)
    g_self = np.zeros(N, dtype=h.dtype)
    for e in range(E):
        a = src[e]
        b = dst[e]
        acc = 0.0
        for f in range(F):
            acc += dm[a, f] * h[b, f] + dm[b, f] * h[a, f]
        g_edge[e] = acc
    for i in range(N):
        acc = 0.0
        for f in range(F):
            acc += dm[i, f] * h[i, f]
        g_self[i] = acc
    return g_edge, g_self


# ---------------------------------------------------------------------------
# numpy implementations


def _gru_forward_numpy(gi, mask, w_hh, b_hh):
    T, S, H3 = gi.shape
    H = H3 // 3
    hs = np.zeros((T, S, H), dtype=gi.dtype)
    r = np.zeros_like(hs)
    z = np.zeros_like(hs)
    n = np.zeros_like(hs)
    ghn = np.zeros_like(hs)
    h = np.zeros((S, H), dtype=gi.dtype)
    for t in range(T):
        gh = h @ w_hh.T + b_hh
        rr = _sigmoid(gi[t, :, :H] + gh[:, :H])
        zz = _sigmoid(gi[t, :, H:2 * H] + gh[:, H:2 * H])
        nn = np.tanh(gi[t, :, 2 * H:] + rr * gh[:, 2 * H:])
        hnew = (1.0 - zz) * nn + zz * h
        m = mask[t][:, None]
        h = m * hnew + (1.0 - m) * h
        hs[t], r[t], z[t], n[t], ghn[t] = h, rr, zz, nn, gh[:, 2 * H:]
    return hs, r, z, n, ghn


def _gru_backward_numpy(dhs, mask, w_hh, hs, r, z, n, ghn):
    T, S, H = hs.shape
    dgi = np.zeros((T, S, 3 * H), dtype=hs.dtype)
    dw_hh = np.zeros((3 * H, H), dtype=hs.dtype)
    db_hh = np.zeros(3 * H, dtype=hs.dtype)
    dh = np.zeros((S, H), dtype=hs.dtype)
    zero = np.zeros((S, H), dtype=hs.dtype)
    for t in range(T - 1, -1, -1):
        hprev = hs[t - 1] if t > 0 else zero
        m = mask[t][:, None]
        g = dh + dhs[t]
        dnew = m * g
        dan = dnew * (1.0 - z[t]) * (1.0 - n[t] ** 2)
        daz = dnew * (hprev - n[t]) * z[t] * (1.0 - z[t])
        dar = dan * ghn[t] * r[t] * (1.0 - r[t])
        dgi[t] = np.concatenate([dar, daz, dan], axis=1)
        dgh = np.concatenate([dar, daz, dan * r[t]], axis=1)
        dh = (1.0 - m) * g + dnew * z[t] + dgh @ w_hh
        dw_hh += dgh.T @ hprev
        db_hh += dgh.sum(axis=0)
    return dgi, dw_hh, db_hh


def _aggregate_numpy(h, src, dst, coef_edge, coef_self):
    out = coef_self[:, None] * h
    np.add.at(out, src, coef_edge[:, None] * h[dst])
    np.add.at(out, dst, coef_edge[:, None] * h[src])
    return out


def _pair_products_numpy(dm, h, src, dst):
    g_edge = np.einsum("ef,ef->e", dm[src], h[dst]) + np.einsum("ef,ef->e", dm[dst], h[src])
    g_self = np.einsum("nf,nf->n", dm, h)
    return g_edge, g_self


NUMPY_KERNELS = {
    "gru_forward": _gru_forward_numpy,
    "gru_backward": _gru_backward_numpy,
    "aggregate": _aggregate_numpy,
    "pair_products": _pair_products_numpy,
}

if HAVE_NUMBA:
    JIT_KERNELS = {
        "gru_forward": njit(_gru_forward_loop),
        "gru_backward": njit(_gru_backward_loop),
        "aggregate": njit(_aggregate_loop),
        "pair_products": njit(_pair_products_loop),
    }
    ACTIVE = dict(JIT_KERNELS)
    if not USING_SVML:
        # Without SVML numba evaluates exp/tanh one scalar at a time, which
        # loses to numpy's SIMD ufuncs on the gate math (see benchmarks/).
        ACTIVE["gru_forward"] = _gru_forward_numpy
        ACTIVE["gru_backward"] = _gru_backward_numpy
else:
    JIT_KERNELS = None
    ACTIVE = NUMPY_KERNELS


def gru_forward(gi, mask, w_hh, b_hh):
    """Run a gated recurrence from a zero state.

    Returns ``(hs, r, z, n, ghn)``; the last four are cached gate values for
    :func:`gru_backward`.
    """
    return ACTIVE["gru_forward"](gi, mask, w_hh, b_hh)


def gru_backward(dhs, mask, w_hh, hs, r, z, n, ghn):
    """Backpropagate ``dhs`` (gradient w.r.t. every output state).

    Returns ``(dgi, dw_hh, db_hh)``.
    """
    return ACTIVE["gru_backward"](dhs, mask, w_hh, hs, r, z, n, ghn)


def aggregate(h, src, dst, coef_edge, coef_self):
    """Symmetric sparse product ``A @ h`` for an undirected edge list plus diagonal."""
    return ACTIVE["aggregate"](h, src, dst, coef_edge, coef_self)


def pair_products(dm, h, src, dst):
    """Per-edge ``dm[a].h[b] + dm[b].h[a]`` and per-node ``dm[i].h[i]``."""
    return ACTIVE["pair_products"](dm, h, src, dst)
