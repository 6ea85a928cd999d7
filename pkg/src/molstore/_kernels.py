"""Hot numeric loops, each with a numba-compiled and a pure-numpy implementation.

The numba path is used when numba imports cleanly and ``MOLSTORE_NUMBA`` is not
set to ``0``. Both paths return the same values; tests and
``benchmarks/bench_kernels.py`` compare them directly.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("MOLSTORE_NUMBA", "1").strip().lower() not in (
    "0",
    "false",
    "no",
    "off",
)

# anchors are evaluated in blocks to bound the memory of the numpy median path
_MEDIAN_CHUNK = 512
# samples per block of the numba median; its rank tree then stays in cache
_FENWICK_BLOCK = 1 << 16


# --- occupancy window means --------------------------------------------------


def window_means_numpy(values, window):
    """Mean of ``values[max(0, i - window + 1) : i + 1]`` for every i."""
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[0]
    cs = np.zeros(n + 1)
    np.cumsum(values, out=cs[1:])
    idx = np.arange(n)
    lo = np.maximum(0, idx - window + 1)
    return (cs[idx + 1] - cs[lo]) / (idx + 1 - lo)


# --- masked rolling median ----------------------------------------------------


def masked_rolling_median_numpy(x, mask, anchors, half):
    """Median of ``x[j]`` over ``|j - a| <= half`` and ``mask[j]``, at each anchor a.

    NaN where the window holds no masked-in sample.
    """
    x = np.asarray(x, dtype=np.float64)
    anchors = np.asarray(anchors, dtype=np.int64)
    xm = np.where(mask, x, np.nan)
    padded = np.concatenate([np.full(half, np.nan), xm, np.full(half, np.nan)])
    view = np.lib.stride_tricks.sliding_window_view(padded, 2 * half + 1)
    out = np.empty(anchors.shape[0])
    for start in range(0, anchors.shape[0], _MEDIAN_CHUNK):
        block = view[anchors[start : start + _MEDIAN_CHUNK]]
        counts = np.sum(~np.isnan(block), axis=1)
        res = np.full(block.shape[0], np.nan)
        ok = counts > 0
        if np.any(ok):
            srt = np.sort(block[ok], axis=1)  # NaNs sort last
            c = counts[ok]
            rows = np.arange(srt.shape[0])
            lo = srt[rows, (c - 1) // 2]
            hi = srt[rows, c // 2]
            res[ok] = 0.5 * (lo + hi)
        out[start : start + _MEDIAN_CHUNK] = res
    return out


# --- below-threshold spans ----------------------------------------------------


def threshold_spans_numpy(x, threshold):
    """Maximal runs where ``x < threshold``, as (starts, ends) with ends exclusive."""
    below = (np.asarray(x) < np.asarray(threshold)).astype(np.int8)
    d = np.diff(below, prepend=np.int8(0), append=np.int8(0))
    starts = np.flatnonzero(d == 1).astype(np.int64)
    ends = np.flatnonzero(d == -1).astype(np.int64)
    return starts, ends


if HAVE_NUMBA:

    @njit(cache=True)
    def window_means_numba(values, window):
        n = values.shape[0]
        cs = np.zeros(n + 1)
        acc = 0.0
        for i in range(n):
            acc += values[i]
            cs[i + 1] = acc
        out = np.empty(n)
        for i in range(n):
            lo = i - window + 1
            if lo < 0:
                lo = 0
            out[i] = (cs[i + 1] - cs[lo]) / (i + 1 - lo)
        return out

    @njit(cache=True)
    def _fenwick_kth(tree, k):
        # smallest rank r with (count of ranks <= r) > k
        n = tree.shape[0] - 1
        pos = 0
        step = 1
        while step * 2 <= n:
            step *= 2
        while step:
            nxt = pos + step
            if nxt <= n and tree[nxt] <= k:
                pos = nxt
                k -= tree[nxt]
            step //= 2
        return pos  # 0-based rank

    @njit(cache=True)
    def _sliding_median_ranks(sorted_vals, rank, mask, anchors, half):
        n = rank.shape[0]
        tree = np.zeros(n + 1, dtype=np.int64)
        out = np.empty(anchors.shape[0])
        cur_lo = 0
        cur_hi = 0
        count = 0
        for k in range(anchors.shape[0]):
            a = anchors[k]
            lo = max(0, a - half)
            hi = min(n, a + half + 1)
            while cur_hi < hi:
                if mask[cur_hi]:
                    i = rank[cur_hi] + 1
                    while i <= n:
                        tree[i] += 1
                        i += i & -i
                    count += 1
                cur_hi += 1
            while cur_lo < lo:
                if mask[cur_lo]:
                    i = rank[cur_lo] + 1
                    while i <= n:
                        tree[i] -= 1
                        i += i & -i
                    count -= 1
                cur_lo += 1
            if count == 0:
                out[k] = np.nan
            else:
                v1 = sorted_vals[_fenwick_kth(tree, (count - 1) // 2)]
                v2 = sorted_vals[_fenwick_kth(tree, count // 2)]
                out[k] = 0.5 * (v1 + v2)
        return out

    def masked_rolling_median_numba(x, mask, anchors, half):
        """Same result as the numpy path from a sliding Fenwick tree over sample ranks.

        Each sample enters and leaves the window once, so the cost is
        O(n log n) however much neighbouring windows overlap. Anchors are
        handled in blocks with block-local ranks to keep the tree in cache.
        """
        n = x.shape[0]
        perm = np.argsort(anchors, kind="stable")
        srt = anchors[perm]
        res = np.empty(srt.shape[0])
        block = max(_FENWICK_BLOCK, 4 * half)
        k0 = 0
        while k0 < srt.shape[0]:
            k1 = int(np.searchsorted(srt, srt[k0] + block, side="left"))
            s0 = max(0, int(srt[k0]) - half)
            s1 = min(n, int(srt[k1 - 1]) + half + 1)
            seg = x[s0:s1]
            order = np.argsort(seg)
            rank = np.empty(order.shape[0], dtype=np.int64)
            rank[order] = np.arange(order.shape[0])
            res[k0:k1] = _sliding_median_ranks(seg[order], rank, mask[s0:s1], srt[k0:k1] - s0, half)
            k0 = k1
        out = np.empty(anchors.shape[0])
        out[perm] = res
        return out

    @njit(cache=True)
    def threshold_spans_numba(x, threshold):
        n = x.shape[0]
        starts = np.empty(n // 2 + 1, dtype=np.int64)
        ends = np.empty(n // 2 + 1, dtype=np.int64)
        m = 0
        inside = False
        for i in range(n):
            b = x[i] < threshold[i]
            if b and not inside:
                starts[m] = i
                inside = True
            elif inside and not b:
                ends[m] = i
                m += 1
                inside = False
        if inside:
            ends[m] = n
            m += 1
        return starts[:m].copy(), ends[:m].copy()


def window_means(values, window):
    values = np.ascontiguousarray(values, dtype=np.float64)
    if USE_NUMBA:
        return window_means_numba(values, int(window))
    return window_means_numpy(values, int(window))


def masked_rolling_median(x, mask, anchors, half):
    x = np.ascontiguousarray(x, dtype=np.float64)
    mask = np.ascontiguousarray(mask, dtype=np.bool_)
    anchors = np.ascontiguousarray(anchors, dtype=np.int64)
    if USE_NUMBA:
        return masked_rolling_median_numba(x, mask, anchors, int(half))
    return masked_rolling_median_numpy(x, mask, anchors, int(half))


def threshold_spans(x, threshold):
    x = np.ascontiguousarray(x, dtype=np.float64)
    threshold = np.ascontiguousarray(np.broadcast_to(threshold, x.shape), dtype=np.float64)
    if USE_NUMBA:
        return threshold_spans_numba(x, threshold)
    return threshold_spans_numpy(x, threshold)


def backend() -> str:
    return f"numba {numba.__version__}" if USE_NUMBA else "numpy"
