"""Compiled dynamic programs: path cover over subsets, and Held-Karp."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def path_cover_dp(W, interior, ipos, pairs):
    """Minimum-length vertex-disjoint paths realizing the given endpoint pairs.

    W is the full local weight matrix, interior the non-boundary point ids,
    ipos maps a point id to its bit position (or -1), pairs the matching in
    processing order.  Returns (cost, edges); cost is inf when no cover
    exists (then edges is empty).
    """
    m = W.shape[0]
    ni = interior.shape[0]
    q = pairs.shape[0]
    INF = np.inf
    if q == 0:
        edges = np.empty((0, 2), np.int64)
        if ni == 0:
            return 0.0, edges
        return INF, edges
    size = 1 << ni
    dp = np.full((q, size, m), INF)
    par = np.full((q, size, m), -2, np.int16)
    s0 = pairs[0, 0]
    dp[0, 0, s0] = 0.0
    best = INF
    best_head = -1
    full = size - 1
    for j in range(q):
        tj = pairs[j, 1]
        last = j + 1 == q
        for mask in range(size):
            for v in range(m):
                c = dp[j, mask, v]
                if c == INF:
                    continue
                for ui in range(ni):
                    if (mask >> ui) & 1:
                        continue
                    u = interior[ui]
                    nm = mask | (1 << ui)
                    nc = c + W[v, u]
                    if nc < dp[j, nm, u]:
                        dp[j, nm, u] = nc
                        par[j, nm, u] = v
                nc = c + W[v, tj]
                if last:
                    if mask == full and nc < best:
                        best = nc
                        best_head = v
                else:
                    s_next = pairs[j + 1, 0]
                    if nc < dp[j + 1, mask, s_next]:
                        dp[j + 1, mask, s_next] = nc
                        par[j + 1, mask, s_next] = v
    edges = np.empty((ni + q, 2), np.int64)
    if best == INF:
        return INF, edges[:0]
    e = 0
    j = q - 1
    mask = full
    v = best_head
    edges[e, 0] = v
    edges[e, 1] = pairs[j, 1]
    e += 1
    while True:
        p = par[j, mask, v]
        if v == pairs[j, 0]:
            # boundary heads only ever arise by opening the pair
            if j == 0:
                break
            j -= 1
            edges[e, 0] = p
            edges[e, 1] = pairs[j, 1]
            e += 1
            v = p
        else:
            edges[e, 0] = p
            edges[e, 1] = v
            e += 1
            mask ^= 1 << ipos[v]
            v = p
    return best, edges[:e]


@njit(cache=True)
def held_karp_dp(W):
    """Exact tour over the full weight matrix; returns (length, visit order)."""
    n = W.shape[0]
    full = 1 << n
    dp = np.full((full, n), np.inf)
    par = np.full((full, n), -1, np.int8)
    dp[1, 0] = 0.0
    for mask in range(1, full, 2):  # states always contain the start city 0
        for v in range(n):
            if not (mask >> v) & 1:
                continue
            c = dp[mask, v]
            if c == np.inf:
                continue
            for u in range(1, n):
                if (mask >> u) & 1:
                    continue
                nm = mask | (1 << u)
                nc = c + W[v, u]
                if nc < dp[nm, u]:
                    dp[nm, u] = nc
                    par[nm, u] = v
    fm = full - 1
    best = np.inf
    bj = -1
    for v in range(1, n):
        c = dp[fm, v] + W[v, 0]
        if c < best:
            best = c
            bj = v
    order = np.empty(n, np.int64)
    mask = fm
    v = bj
    for pos in range(n - 1, -1, -1):
        order[pos] = v
        pv = par[mask, v]
        mask ^= 1 << v
        v = pv
    return best, order
