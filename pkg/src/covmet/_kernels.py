"""Hot numeric kernels: forest tree building/prediction and lasso
coordinate descent.

Every kernel is written once, as explicit-loop code that is valid both
under numba's nopython compiler and as plain numpy/python.  When numba
is importable and ``COVMET_DISABLE_NUMBA`` is unset, kernels are
compiled with ``@njit(cache=True, nogil=True)``; otherwise the very same
functions run uncompiled.  Both paths execute identical operations in
identical order, so results are bit-for-bit equal - the fallback is
just slow.  ``benchmarks/bench_kernels.py`` measures the gap.

Determinism notes baked into the code:
  * sorts are stable (mergesort), so ties never reorder observations;
  * per-node feature sampling uses an inline splitmix64 counter
    generator seeded from the caller, identical on both paths;
  * all reductions are sequential loops with a fixed order.
"""

from __future__ import annotations

import functools
import os

import numpy as np

__all__ = [
    "JIT_ENABLED",
    "DISABLE_ENV_VAR",
    "build_tree",
    "lasso_cd",
    "predict_forest",
    "py_impl",
    "refine_leaf_values",
]

DISABLE_ENV_VAR = "COVMET_DISABLE_NUMBA"


def _jit_enabled() -> bool:
    flag = os.environ.get(DISABLE_ENV_VAR, "").strip().lower()
    if flag not in {"", "0", "false", "no"}:
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


JIT_ENABLED = _jit_enabled()

if JIT_ENABLED:
    from numba import njit
else:

    def njit(*args, **kwargs):
        # numpy warns on scalar integer overflow where compiled code
        # wraps silently; suppress so both paths behave identically.
        def decorate(fn):
            @functools.wraps(fn)
            def wrapper(*a, **k):
                with np.errstate(over="ignore"):
                    return fn(*a, **k)

            wrapper.py_func = fn
            return wrapper

        if args and callable(args[0]):
            return decorate(args[0])
        return decorate


def py_impl(kernel):
    """The uncompiled implementation of a kernel, with the same
    wrap-around integer semantics as the compiled one."""
    fn = getattr(kernel, "py_func", kernel)

    @functools.wraps(fn)
    def wrapper(*a, **k):
        with np.errstate(over="ignore"):
            return fn(*a, **k)

    return wrapper


# ---------------------------------------------------------------------------
# splitmix64 constants: the counter-based uint64 generator for per-node
# feature sampling lives inlined in build_tree, keeping the state inside
# one stack frame so it never crosses the jit boundary (boxing uint64
# through python would re-dispatch it with signed semantics).

_SM_GOLD = np.uint64(0x9E3779B97F4A7C15)
_SM_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_SM_MIX2 = np.uint64(0x94D049BB133111EB)
_SM_S30 = np.uint64(30)
_SM_S27 = np.uint64(27)
_SM_S31 = np.uint64(31)


# ---------------------------------------------------------------------------
# regression tree: variance-reduction CART on a bootstrap sample


@njit(cache=True, nogil=True)
def build_tree(x, y, sample_idx, mtry, min_node, max_depth, seed):
    """Grow one regression tree on the rows listed in ``sample_idx``.

    Splits minimize child SSE (equivalently maximize variance
    reduction) over ``mtry`` features drawn per node; candidate
    thresholds are midpoints between consecutive distinct sorted
    values; a split must leave at least ``min_node`` rows per child and
    strictly reduce SSE.  Ties are broken toward the lowest feature
    index, then the smallest threshold.  ``max_depth == 0`` means
    unlimited.  Leaf values are means over the bootstrap rows (callers
    may refine them against the full sample afterwards).

    Returns (feature, threshold, left, right, value) arrays trimmed to
    the node count; ``feature[i] < 0`` marks a leaf.
    """
    n_boot = sample_idx.shape[0]
    p = x.shape[1]
    max_nodes = 2 * n_boot + 1
    feature = np.full(max_nodes, -1, dtype=np.int32)
    threshold = np.zeros(max_nodes, dtype=np.float64)
    left = np.full(max_nodes, -1, dtype=np.int32)
    right = np.full(max_nodes, -1, dtype=np.int32)
    value = np.zeros(max_nodes, dtype=np.float64)

    idx = sample_idx.copy()
    buf = np.empty(n_boot, dtype=np.int64)
    vals = np.empty(n_boot, dtype=np.float64)
    feat_pool = np.empty(p, dtype=np.int64)

    stack_node = np.empty(max_nodes, dtype=np.int64)
    stack_start = np.empty(max_nodes, dtype=np.int64)
    stack_end = np.empty(max_nodes, dtype=np.int64)
    stack_depth = np.empty(max_nodes, dtype=np.int64)
    stack_node[0] = 0
    stack_start[0] = 0
    stack_end[0] = n_boot
    stack_depth[0] = 0
    top = 1
    n_nodes = 1
    state = np.uint64(seed)

    while top > 0:
        top -= 1
        node = stack_node[top]
        start = stack_start[top]
        end = stack_end[top]
        depth = stack_depth[top]
        m = end - start

        s = 0.0
        ss = 0.0
        for i in range(start, end):
            yi = y[idx[i]]
            s += yi
            ss += yi * yi
        value[node] = s / m
        sse = ss - s * s / m

        if m < 2 * min_node or (max_depth > 0 and depth >= max_depth) or sse <= 0.0:
            continue

        # draw mtry distinct features (partial Fisher-Yates), then sort
        # ascending so the lowest-index tie-break falls out of scan order
        for j in range(p):
            feat_pool[j] = j
        k = mtry if mtry < p else p
        for j in range(k):
            state = state + _SM_GOLD
            z = state
            z = (z ^ (z >> _SM_S30)) * _SM_MIX1
            z = (z ^ (z >> _SM_S27)) * _SM_MIX2
            r = z ^ (z >> _SM_S31)
            pick = j + np.int64(r % np.uint64(p - j))
            tmp = feat_pool[j]
            feat_pool[j] = feat_pool[pick]
            feat_pool[pick] = tmp
        for a in range(1, k):
            key = feat_pool[a]
            b = a - 1
            while b >= 0 and feat_pool[b] > key:
                feat_pool[b + 1] = feat_pool[b]
                b -= 1
            feat_pool[b + 1] = key

        best_gain = 0.0
        best_feat = -1
        best_thr = 0.0
        for jj in range(k):
            f = feat_pool[jj]
            for i in range(m):
                vals[i] = x[idx[start + i], f]
            order = np.argsort(vals[:m], kind="mergesort")
            ls = 0.0
            lss = 0.0
            for i in range(m - 1):
                yi = y[idx[start + order[i]]]
                ls += yi
                lss += yi * yi
                vi = vals[order[i]]
                vn = vals[order[i + 1]]
                if vi >= vn:
                    continue
                nl = i + 1
                nr = m - nl
                if nl < min_node or nr < min_node:
                    continue
                rs = s - ls
                rss = ss - lss
                child_sse = (lss - ls * ls / nl) + (rss - rs * rs / nr)
                gain = sse - child_sse
                if gain > best_gain:
                    best_gain = gain
                    best_feat = f
                    best_thr = 0.5 * (vi + vn)

        if best_feat < 0:
            continue

        # stable two-pass partition: left block keeps order, then right
        nl = 0
        for i in range(start, end):
            if x[idx[i], best_feat] <= best_thr:
                buf[nl] = idx[i]
                nl += 1
        nr = nl
        for i in range(start, end):
            if x[idx[i], best_feat] > best_thr:
                buf[nr] = idx[i]
                nr += 1
        for i in range(m):
            idx[start + i] = buf[i]

        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        feature[node] = best_feat
        threshold[node] = best_thr
        left[node] = lid
        right[node] = rid
        stack_node[top] = lid
        stack_start[top] = start
        stack_end[top] = start + nl
        stack_depth[top] = depth + 1
        top += 1
        stack_node[top] = rid
        stack_start[top] = start + nl
        stack_end[top] = end
        stack_depth[top] = depth + 1
        top += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
    )


@njit(cache=True, nogil=True)
def refine_leaf_values(feature, threshold, left, right, value, x, y):
    """Replace leaf values with means over the full training rows routed
    through the tree (in place).

    Every leaf region contains at least one bootstrap row, and each
    bootstrap row is a copy of a training row that routes to the same
    leaf, so no reachable leaf is left empty; empty leaves (unreachable
    by construction) keep their bootstrap mean.
    """
    n_nodes = feature.shape[0]
    sums = np.zeros(n_nodes, dtype=np.float64)
    counts = np.zeros(n_nodes, dtype=np.int64)
    for i in range(x.shape[0]):
        node = 0
        while feature[node] >= 0:
            if x[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        sums[node] += y[i]
        counts[node] += 1
    for nd in range(n_nodes):
        if feature[nd] < 0 and counts[nd] > 0:
            value[nd] = sums[nd] / counts[nd]


@njit(cache=True, nogil=True)
def predict_forest(feature, threshold, left, right, value, offsets, x, out):
    """Average tree predictions into ``out`` (in place).

    Tree t occupies nodes ``offsets[t]:offsets[t+1]`` of the packed
    arrays; ``left``/``right`` hold global node ids.  Accumulation runs
    in tree order, so results do not depend on scheduling.
    """
    m = x.shape[0]
    n_trees = offsets.shape[0] - 1
    for i in range(m):
        acc = 0.0
        for t in range(n_trees):
            node = offsets[t]
            while feature[node] >= 0:
                if x[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            acc += value[node]
        out[i] = acc / n_trees


# ---------------------------------------------------------------------------
# lasso coordinate descent


@njit(cache=True, nogil=True)
def lasso_cd(xs, beta, resid, lam, col_nu, max_sweeps, tol):
    """Cyclic coordinate descent for one penalty level (in place).

    Minimizes (1/2n)||y - X b||^2 + lam ||b||_1 over ``beta`` given the
    running residual ``resid = y - X beta``; both are updated in place
    so callers can warm-start along a penalty path.  ``col_nu[j]`` is
    (1/n)||x_j||^2; columns with zero norm are skipped (their
    coefficient stays fixed).  Iteration stops when the largest
    coefficient change in a sweep drops below ``tol``.

    Returns the number of sweeps performed.
    """
    n, p = xs.shape
    for sweep in range(max_sweeps):
        max_delta = 0.0
        for j in range(p):
            nu = col_nu[j]
            if nu <= 0.0:
                continue
            bj = beta[j]
            dot = 0.0
            for i in range(n):
                dot += xs[i, j] * resid[i]
            rho = dot / n + nu * bj
            if rho > lam:
                bnew = (rho - lam) / nu
            elif rho < -lam:
                bnew = (rho + lam) / nu
            else:
                bnew = 0.0
            delta = bnew - bj
            if delta != 0.0:
                for i in range(n):
                    resid[i] -= xs[i, j] * delta
                beta[j] = bnew
                adelta = delta if delta >= 0.0 else -delta
                if adelta > max_delta:
                    max_delta = adelta
        if max_delta < tol:
            return sweep + 1
    return max_sweeps
