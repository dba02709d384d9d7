"""Compiled inner loops evaluated once per permutation row.

Every kernel processes rows independently and in a fixed order, so a statistic
for a given label arrangement is bit-identical whatever batch it appears in.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def prefix_ks_mean(yrank, n_unique, labels, n_prefix):
    """Mean over k = 1..n_prefix of the KS distance between arms in the first k subjects.

    ``yrank`` holds dense outcome ranks (0..n_unique-1) in biomarker order and
    ``labels`` is a (B, n) array of 0/1 arm indicators in the same order.
    A prefix containing a single arm contributes zero.
    """
    n_rows = labels.shape[0]
    out = np.empty(n_rows)
    c1 = np.zeros(n_unique, np.int64)
    c0 = np.zeros(n_unique, np.int64)
    for b in range(n_rows):
        c1[:] = 0
        c0[:] = 0
        n1 = 0
        n0 = 0
        lo = n_unique
        hi = -1
        total = 0.0
        for k in range(n_prefix):
            r = yrank[k]
            if labels[b, k] != 0:
                c1[r] += 1
                n1 += 1
            else:
                c0[r] += 1
                n0 += 1
            if r < lo:
                lo = r
            if r > hi:
                hi = r
            if n1 == 0 or n0 == 0:
                continue
            a1 = 0
            a0 = 0
            best = 0
            for u in range(lo, hi + 1):
                a1 += c1[u]
                a0 += c0[u]
                gap = a1 * n0 - a0 * n1
                if gap < 0:
                    gap = -gap
                if gap > best:
                    best = gap
            total += best / (n1 * n0)
        out[b] = total / n_prefix
    return out


@njit(cache=True, nogil=True)
def cell_mean_gap(y, labels, first, second):
    """|mean(y[label == first]) - mean(y[label == second])| per row; 0 if a cell is empty."""
    n_rows, n = labels.shape
    out = np.empty(n_rows)
    for b in range(n_rows):
        s1 = 0.0
        s0 = 0.0
        m1 = 0
        m0 = 0
        for i in range(n):
            g = labels[b, i]
            if g == first:
                s1 += y[i]
                m1 += 1
            elif g == second:
                s0 += y[i]
                m0 += 1
        if m1 == 0 or m0 == 0:
            out[b] = 0.0
        else:
            d = s1 / m1 - s0 / m0
            out[b] = d if d >= 0 else -d
    return out


@njit(cache=True, nogil=True)
def cutpoint_scan(y, labels, block_end, min_cell):
    """Maximum stratum-contrast gap over feasible thresholds, per label row.

    Subjects are sorted by biomarker; ``block_end[j]`` is the exclusive end index
    of the j-th block of tied biomarker values, so threshold j splits the sample
    into ``[:block_end[j]]`` (<= tau) and the remainder (> tau).
    Returns (best gap, best block index or -1, lower-stratum contrast, upper-stratum contrast).
    """
    n_rows, n = labels.shape
    n_blocks = block_end.shape[0]
    best = np.zeros(n_rows)
    arg = np.full(n_rows, -1, np.int64)
    d_le = np.full(n_rows, np.nan)
    d_gt = np.full(n_rows, np.nan)
    for b in range(n_rows):
        tot1 = 0.0
        tot0 = 0.0
        cnt1 = 0
        cnt0 = 0
        for i in range(n):
            if labels[b, i] != 0:
                tot1 += y[i]
                cnt1 += 1
            else:
                tot0 += y[i]
                cnt0 += 1
        s1 = 0.0
        s0 = 0.0
        m1 = 0
        m0 = 0
        i = 0
        found = False
        for j in range(n_blocks):
            while i < block_end[j]:
                if labels[b, i] != 0:
                    s1 += y[i]
                    m1 += 1
                else:
                    s0 += y[i]
                    m0 += 1
                i += 1
            u1 = cnt1 - m1
            u0 = cnt0 - m0
            if m1 < min_cell or m0 < min_cell or u1 < min_cell or u0 < min_cell:
                continue
            low = s1 / m1 - s0 / m0
            high = (tot1 - s1) / u1 - (tot0 - s0) / u0
            gap = high - low
            if gap < 0:
                gap = -gap
            if not found or gap > best[b]:
                found = True
                best[b] = gap
                arg[b] = j
                d_le[b] = low
                d_gt[b] = high
    return best, arg, d_le, d_gt
