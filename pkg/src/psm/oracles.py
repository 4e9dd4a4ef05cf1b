"""Slow reference implementations used to cross-check the fast paths.

These enumerate everything explicitly and are only meant for small ``n``.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def naive_scan_consecutive(X, k: int) -> tuple[float, tuple[int, int]]:
    """Largest contiguous k-by-k window sum by direct summation of every window."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    best, corner = -math.inf, None
    for r in range(n - k + 1):
        for c in range(n - k + 1):
            s = math.fsum(X[r:r + k, c:c + k].ravel())
            if s > best:
                best, corner = s, (r, c)
    return best, corner


def brute_force_scan_arbitrary(X, k: int) -> float:
    """Largest k-by-k submatrix sum over every (row set, column set) pair."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    best = -math.inf
    subsets = list(itertools.combinations(range(n), k))
    for rows in subsets:
        block = X[list(rows)]
        for cols in subsets:
            best = max(best, float(block[:, list(cols)].sum()))
    return best


def brute_force_ml(X, k: int, m: int) -> tuple[float, list[tuple[int, int]]]:
    """Best product-disjoint m-set of windows by full enumeration.

    Returns the optimal total and its sorted corner list; ties go to the
    lexicographically smallest sorted corner list.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    p = n - k + 1
    corners = [(r, c) for r in range(p) for c in range(p)]
    sums = {rc: math.fsum(X[rc[0]:rc[0] + k, rc[1]:rc[1] + k].ravel()) for rc in corners}
    best, best_key = -math.inf, None
    for combo in itertools.combinations(corners, m):
        if any(abs(a[0] - b[0]) < k and abs(a[1] - b[1]) < k for a, b in itertools.combinations(combo, 2)):
            continue
        total = math.fsum(sums[c] for c in combo)
        key = sorted(combo)
        if total > best or (total == best and key < best_key):
            best, best_key = total, key
    return best, best_key
