"""Compiled kernels for the minimum-size quantile cube search.

The search space is cubes whose lower corner coordinates are, per axis,
coordinates of input points (any cube containing k points can be translated
so every lower face touches a point, without losing points).  Feasibility of
a side length is monotone, so the minimum side is found by binary search
over per-axis coordinate differences, then the lexicographically smallest
lower corner is located at that side length.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def feasible_d2(xs, ys, s, k, tol):
    """True if some axis-aligned square of side s covers >= k of the points.

    xs must be ascending; ys aligned with xs.
    """
    n = xs.shape[0]
    for i in range(n):
        if i > 0 and xs[i] == xs[i - 1]:
            continue
        j = np.searchsorted(xs, xs[i] + s + tol, side="right")
        m = j - i
        if m < k:
            continue
        ysl = np.sort(ys[i:j])
        for a in range(m - k + 1):
            b = np.searchsorted(ysl, ysl[a] + s + tol, side="right")
            if b - a >= k:
                return True
    return False


@njit(cache=True)
def lexmin_d2(xs, ys, ys_all, s, k, tol):
    """Lexicographically smallest lower corner of a feasible side-s square.

    Corner coordinates are drawn per axis from all point coordinates
    (ys_all is the sorted global y array), so a face may be anchored by a
    point that ends up outside the square.
    """
    n = xs.shape[0]
    for i in range(n):
        if i > 0 and xs[i] == xs[i - 1]:
            continue
        j = np.searchsorted(xs, xs[i] + s + tol, side="right")
        m = j - i
        if m < k:
            continue
        ysl = np.sort(ys[i:j])
        for a in range(n):
            if a > 0 and ys_all[a] == ys_all[a - 1]:
                continue
            lo = np.searchsorted(ysl, ys_all[a], side="left")
            hi = np.searchsorted(ysl, ys_all[a] + s + tol, side="right")
            if hi - lo >= k:
                return xs[i], ys_all[a]
    return np.nan, np.nan


@njit(cache=True)
def _slab_feasible_yz(ysl, zsl, s, k, tol):
    """True if an s-by-s window covers >= k of the given (y, z) pairs."""
    m = ysl.shape[0]
    zo = np.argsort(zsl, kind="mergesort")
    zss = zsl[zo]
    ybz = ysl[zo]
    yss = np.sort(ysl)
    for a in range(m - k + 1):
        if a > 0 and yss[a] == yss[a - 1]:
            continue
        ylo = yss[a]
        yhi = ylo + s + tol
        # cheap prune: the whole y-window must hold at least k points
        if np.searchsorted(yss, yhi, side="right") - a < k:
            continue
        cnt = 0
        r = 0
        for left in range(m - k + 1):
            if left > 0:
                if left - 1 < r and ylo <= ybz[left - 1] <= yhi:
                    cnt -= 1
                if r < left:
                    r = left
                    cnt = 0
            zhi = zss[left] + s + tol
            while r < m and zss[r] <= zhi:
                if ylo <= ybz[r] <= yhi:
                    cnt += 1
                r += 1
            if cnt >= k:
                return True
    return False


@njit(cache=True)
def feasible_d3(xs, ys, zs, s, k, tol):
    """True if some axis-aligned cube of side s covers >= k of the points."""
    n = xs.shape[0]
    for i in range(n):
        if i > 0 and xs[i] == xs[i - 1]:
            continue
        j = np.searchsorted(xs, xs[i] + s + tol, side="right")
        m = j - i
        if m < k:
            continue
        if _slab_feasible_yz(ys[i:j].copy(), zs[i:j].copy(), s, k, tol):
            return True
    return False


@njit(cache=True)
def lexmin_d3(xs, ys, zs, ys_all, zs_all, s, k, tol):
    """Lexicographically smallest lower corner of a feasible side-s cube.

    Corner coordinates are drawn per axis from all point coordinates
    (ys_all/zs_all are the sorted global arrays).  Each coordinate is fixed
    in turn: feasibility of completing a prefix is axis-local, so the first
    completable anchor per axis is the lexicographic optimum.
    """
    n = xs.shape[0]
    for i in range(n):
        if i > 0 and xs[i] == xs[i - 1]:
            continue
        j = np.searchsorted(xs, xs[i] + s + tol, side="right")
        m = j - i
        if m < k:
            continue
        ysl = ys[i:j].copy()
        zsl = zs[i:j].copy()
        if not _slab_feasible_yz(ysl, zsl, s, k, tol):
            continue
        # x anchor fixed; find the smallest feasible y anchor
        yo = np.argsort(ysl, kind="mergesort")
        yss = ysl[yo]
        zby = zsl[yo]
        for a in range(n):
            if a > 0 and ys_all[a] == ys_all[a - 1]:
                continue
            lo = np.searchsorted(yss, ys_all[a], side="left")
            hi = np.searchsorted(yss, ys_all[a] + s + tol, side="right")
            if hi - lo < k:
                continue
            zw = np.sort(zby[lo:hi])
            ok = False
            for c in range(zw.shape[0] - k + 1):
                if np.searchsorted(zw, zw[c] + s + tol, side="right") - c >= k:
                    ok = True
                    break
            if not ok:
                continue
            # y anchor fixed; find the smallest feasible z anchor
            for c in range(n):
                if c > 0 and zs_all[c] == zs_all[c - 1]:
                    continue
                zlo = np.searchsorted(zw, zs_all[c], side="left")
                zhi = np.searchsorted(zw, zs_all[c] + s + tol, side="right")
                if zhi - zlo >= k:
                    return xs[i], ys_all[a], zs_all[c]
            return np.nan, np.nan, np.nan
    return np.nan, np.nan, np.nan
