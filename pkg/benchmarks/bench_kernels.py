"""Time the compiled loop kernels against the vectorized numpy ones.

    python benchmarks/bench_kernels.py [--repeat 20]

Shapes mimic one training batch at the default sizes: 120 graphs, about ten
paragraphs each, paragraphs padded to a few hundred tokens.
"""
import argparse
import time

import numpy as np

from incongruity.kernels import ACTIVE, JIT_KERNELS, NUMPY_KERNELS


def make_inputs(rng, T=150, S=1300, H=200, n_graphs=120, k=10):
    gi = rng.normal(0, 0.5, (T, S, 3 * H))
    lengths = rng.integers(T // 3, T + 1, S)
    mask = (np.arange(T)[:, None] < lengths[None, :]).astype(np.float64)
    w_hh = rng.normal(0, 0.1, (3 * H, H))
    b_hh = rng.normal(0, 0.1, 3 * H)
    n_nodes = n_graphs * (k + 1)
    src = np.repeat(np.arange(n_graphs) * (k + 1), k)
    dst = src + np.tile(np.arange(1, k + 1), n_graphs)
    h = rng.normal(size=(n_nodes, H))
    coef_edge = rng.random(src.size)
    coef_self = rng.random(n_nodes)
    return dict(gru=(gi, mask, w_hh, b_hh), graph=(h, src, dst, coef_edge, coef_self))


def bench(fn, args, repeat):
    fn(*args)  # warm-up (and compilation)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seq-len", type=int, default=150)
    ap.add_argument("--sequences", type=int, default=1300)
    args = ap.parse_args()
    if JIT_KERNELS is None:
        raise SystemExit("numba unavailable (or INCONGRUITY_NO_NUMBA set); nothing to compare")

    rng = np.random.default_rng(0)
    data = make_inputs(rng, T=args.seq_len, S=args.sequences)
    gi, mask, w_hh, b_hh = data["gru"]
    hs, r, z, n, ghn = NUMPY_KERNELS["gru_forward"](*data["gru"])
    dhs = rng.normal(size=hs.shape)
    h, src, dst, ce, cs = data["graph"]
    cases = {
        "gru_forward": data["gru"],
        "gru_backward": (dhs, mask, w_hh, hs, r, z, n, ghn),
        "aggregate": data["graph"],
        "pair_products": (rng.normal(size=h.shape), h, src, dst),
    }
    print(f"{'kernel':<14} {'numpy (s)':>10} {'numba (s)':>10} {'speedup':>8}  dispatched")
    for name, fargs in cases.items():
        t_np = bench(NUMPY_KERNELS[name], fargs, args.repeat)
        t_jit = bench(JIT_KERNELS[name], fargs, args.repeat)
        used = "numba" if ACTIVE[name] is JIT_KERNELS[name] else "numpy"
        print(f"{name:<14} {t_np:>10.4f} {t_jit:>10.4f} {t_np / t_jit:>7.2f}x  {used}")


if __name__ == "__main__":
    main()
