"""Compare the compiled kernels against their pure-python fallbacks.

Both paths run in one process: the jit-compiled function and the same
function body retrieved through ``py_impl``, on identical inputs.  The
script verifies bit-identical outputs while it times, since the
fallback is a correctness contract, not an approximation.

Usage:
    python3 benchmarks/bench_kernels.py [--n 2000] [--p 8] [--trees 20]
                                        [--repeats 5] [--seed 0]

Set COVMET_DISABLE_NUMBA=1 to see the degenerate case where both
columns time the interpreter.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from covmet import _kernels
from covmet._kernels import JIT_ENABLED, py_impl


def median_time(fn, repeats):
    fn()  # warm-up: jit compilation, caches
    times = []
    for _ in range(repeats):
        began = time.perf_counter()
        fn()
        times.append(time.perf_counter() - began)
    return float(np.median(times))


def build_inputs(n, p, trees, seed):
    gen = np.random.default_rng(seed)
    x = np.ascontiguousarray(gen.standard_normal((n, p)))
    y = np.ascontiguousarray(x[:, 0] + 0.5 * np.sin(x[:, min(1, p - 1)]) +
                             gen.standard_normal(n))
    boots = [gen.integers(0, n, size=n, dtype=np.int64) for _ in range(trees)]
    seeds = [np.uint64(gen.integers(0, 2 ** 63)) for _ in range(trees)]
    return x, y, boots, seeds


def pack_forest(parts):
    sizes = [part[0].shape[0] for part in parts]
    offsets = np.zeros(len(parts) + 1, dtype=np.int64)
    np.cumsum(sizes, out=offsets[1:])
    feature = np.concatenate([part[0] for part in parts])
    threshold = np.concatenate([part[1] for part in parts])
    value = np.concatenate([part[4] for part in parts])
    left = np.concatenate([
        np.where(part[2] >= 0, part[2] + offsets[t], -1).astype(np.int32)
        for t, part in enumerate(parts)
    ])
    right = np.concatenate([
        np.where(part[3] >= 0, part[3] + offsets[t], -1).astype(np.int32)
        for t, part in enumerate(parts)
    ])
    return feature, threshold, left, right, value, offsets


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=2000)
    parser.add_argument("--p", type=int, default=8)
    parser.add_argument("--trees", type=int, default=20)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    x, y, boots, seeds = build_inputs(args.n, args.p, args.trees, args.seed)
    mtry = max(1, args.p // 3)
    rows = []

    # --- build_tree: one tree over the first bootstrap sample
    jit_tree = lambda: _kernels.build_tree(x, y, boots[0], mtry, 5, 0, seeds[0])
    py_tree = lambda: py_impl(_kernels.build_tree)(x, y, boots[0], mtry, 5, 0, seeds[0])
    a, b = jit_tree(), py_tree()
    assert all(np.array_equal(u, v) for u, v in zip(a, b)), "build_tree paths differ"
    rows.append(("build_tree", median_time(jit_tree, args.repeats),
                 median_time(py_tree, args.repeats)))

    # --- refine_leaf_values: full-sample leaf means on a fresh tree copy
    base = _kernels.build_tree(x, y, boots[0], mtry, 5, 0, seeds[0])

    def refine(impl):
        feature, threshold, left, right, value = (arr.copy() for arr in base)
        impl(feature, threshold, left, right, value, x, y)
        return value

    assert np.array_equal(refine(_kernels.refine_leaf_values),
                          refine(py_impl(_kernels.refine_leaf_values)))
    rows.append(("refine_leaf_values",
                 median_time(lambda: refine(_kernels.refine_leaf_values), args.repeats),
                 median_time(lambda: refine(py_impl(_kernels.refine_leaf_values)),
                             args.repeats)))

    # --- predict_forest: a packed forest over every training row
    parts = [_kernels.build_tree(x, y, boots[t], mtry, 5, 0, seeds[t])
             for t in range(args.trees)]
    feature, threshold, left, right, value, offsets = pack_forest(parts)
    out = np.empty(args.n)

    def predict(impl):
        impl(feature, threshold, left, right, value, offsets, x, out)
        return out.copy()

    assert np.array_equal(predict(_kernels.predict_forest),
                          predict(py_impl(_kernels.predict_forest)))
    rows.append(("predict_forest",
                 median_time(lambda: predict(_kernels.predict_forest), args.repeats),
                 median_time(lambda: predict(py_impl(_kernels.predict_forest)),
                             args.repeats)))

    # --- lasso_cd: one mid-path penalty from a cold start
    xs = (x - x.mean(axis=0)) / x.std(axis=0)
    yc = y - y.mean()
    col_nu = np.ascontiguousarray((xs * xs).sum(axis=0) / args.n)
    lam = 0.1 * float(np.max(np.abs(xs.T @ yc)) / args.n)

    def solve(impl):
        beta = np.zeros(args.p)
        resid = yc.copy()
        impl(xs, beta, resid, lam, col_nu, 2000, 1e-7)
        return beta

    assert np.array_equal(solve(_kernels.lasso_cd), solve(py_impl(_kernels.lasso_cd)))
    rows.append(("lasso_cd",
                 median_time(lambda: solve(_kernels.lasso_cd), args.repeats),
                 median_time(lambda: solve(py_impl(_kernels.lasso_cd)), args.repeats)))

    label = "jit" if JIT_ENABLED else "jit(DISABLED: interpreter)"
    print(f"n={args.n} p={args.p} trees={args.trees} repeats={args.repeats} "
          f"seed={args.seed}")
    print(f"{'kernel':<20} {label:>12} {'python':>12} {'speedup':>9}")
    for name, jt, pt in rows:
        print(f"{name:<20} {jt:>11.5f}s {pt:>11.5f}s {pt / jt:>8.1f}x")
    print("outputs bit-identical on both paths")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
