"""Balanced distance-friendly separators.

Construction runs in two phases: find a smallest anchored cube holding a
fixed quantile of the pivot set Q, then sweep scaling factors t in [1, 3]
minimizing a truncated step-function weight that penalizes points near the
scaled boundary.  The result is balanced with respect to Q and keeps the
point bands around it geometrically sparse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _cube_kernels
from .geometry import (
    CLASSIFY_TOL,
    PointSet,
    Separator,
    classify_points,
    near_set,
    scale,
)


class SeparatorError(ValueError):
    """Separator construction failed (degenerate input or balance violation)."""


def balance_fraction(d: int) -> float:
    """Largest allowed side fraction: 4^d / (4^d + 1)."""
    return 4.0**d / (4.0**d + 1.0)


def quantile_threshold(q: int, d: int) -> int:
    """Points the quantile cube must contain: ceil(q / (4^d + 1))."""
    return -((-q) // (4**d + 1))


def band_range(n: int, d: int) -> tuple[int, int]:
    """Integer band indices materialized for an n-point set in dimension d.

    The lower index is the largest i whose band still reaches below the
    short-segment threshold; the upper index is the smallest i whose band
    threshold reaches 1.
    """
    log_ratio = math.log2(1.5)
    i_min = math.floor(-(1.0 - 1.0 / d) * math.log2(n) / log_ratio + 1e-9) + 1
    i_max = math.ceil(math.log2(n) / d - 1e-9)
    return i_min, i_max


@dataclass(frozen=True)
class StepFunction:
    """Piecewise-constant function on [1, 3].

    ``boundaries`` has one more entry than ``values`` and starts at 1.0 and
    ends at 3.0.  At an interior breakpoint the function takes the larger of
    the two adjacent piece values (the value of the nearer-to-boundary band).
    """

    boundaries: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.boundaries, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        if b.ndim != 1 or v.ndim != 1 or b.shape[0] != v.shape[0] + 1:
            raise ValueError("boundaries must have exactly one more entry than values")
        if not (np.all(np.diff(b) > 0) and b[0] == 1.0 and b[-1] == 3.0):
            raise ValueError("boundaries must increase strictly from 1.0 to 3.0")
        object.__setattr__(self, "boundaries", b)
        object.__setattr__(self, "values", v)

    def value_at(self, t: float) -> float:
        if not 1.0 <= t <= 3.0:
            raise ValueError("step functions are defined on [1, 3]")
        idx = int(np.searchsorted(self.boundaries, t, side="left"))
        if idx < len(self.boundaries) and self.boundaries[idx] == t:
            # exactly on a breakpoint: the nearer band has the larger weight
            if idx == 0:
                return float(self.values[0])
            if idx == len(self.values):
                return float(self.values[-1])
            return float(max(self.values[idx - 1], self.values[idx]))
        return float(self.values[idx - 1])

    def values_at(self, ts: np.ndarray) -> np.ndarray:
        """Vectorized evaluation; breakpoint hits take the max of both sides."""
        ts = np.asarray(ts, dtype=np.float64)
        nb = len(self.boundaries)
        nv = len(self.values)
        idx = np.searchsorted(self.boundaries, ts, side="left")
        exact = self.boundaries[np.minimum(idx, nb - 1)] == ts
        left = np.clip(idx - 1, 0, nv - 1)
        right = np.clip(idx, 0, nv - 1)
        return np.where(
            exact,
            np.maximum(self.values[left], self.values[right]),
            self.values[left],
        )


@dataclass(frozen=True)
class SeparatorChoice:
    """A built separator together with its construction record."""

    sigma_star: Separator
    t_bar: float
    sigma: Separator
    balance_counts: tuple[int, int]  # (|Q inside|, |Q outside|)
    band_sizes: dict
    quantile_k: int


def _max_multiplicity(points: np.ndarray) -> int:
    """Largest number of exactly coincident rows."""
    if points.shape[0] == 0:
        return 0
    order = np.lexsort(points.T[::-1])
    sorted_pts = points[order]
    same = np.all(sorted_pts[1:] == sorted_pts[:-1], axis=1)
    best = 1
    run = 1
    for flag in same:
        run = run + 1 if flag else 1
        if run > best:
            best = run
    return best


def _candidate_sizes(points: np.ndarray) -> np.ndarray:
    """Sorted unique per-axis coordinate differences (the sizes a minimal cube can take)."""
    diffs = []
    for ax in range(points.shape[1]):
        c = np.unique(points[:, ax])
        dd = np.abs(c[:, None] - c[None, :]).ravel()
        diffs.append(dd)
    out = np.unique(np.concatenate(diffs))
    return out[out > 0.0]


def _feasible(points: np.ndarray, s: float, k: int) -> bool:
    d = points.shape[1]
    if d in (2, 3):
        order = np.argsort(points[:, 0], kind="mergesort")
        cols = [np.ascontiguousarray(points[order, ax]) for ax in range(d)]
        if d == 2:
            return bool(_cube_kernels.feasible_d2(cols[0], cols[1], s, k, CLASSIFY_TOL))
        return bool(_cube_kernels.feasible_d3(cols[0], cols[1], cols[2], s, k, CLASSIFY_TOL))
    return _feasible_generic(points, s, k)


def _feasible_generic(points: np.ndarray, s: float, k: int) -> bool:
    """Axis-recursive feasibility for d >= 4 (small inputs only)."""

    def rec(pts: np.ndarray, ax: int) -> bool:
        if ax == pts.shape[1] - 1:
            c = np.sort(pts[:, ax])
            hi = np.searchsorted(c, c + s + CLASSIFY_TOL, side="right")
            return bool(np.any(hi - np.arange(len(c)) >= k))
        c = pts[:, ax]
        for anchor in np.unique(c):
            sub = pts[(c >= anchor) & (c <= anchor + s + CLASSIFY_TOL)]
            if sub.shape[0] >= k and rec(sub, ax + 1):
                return True
        return False

    return rec(points, 0)


def _lexmin_corner(points: np.ndarray, s: float, k: int) -> np.ndarray:
    d = points.shape[1]
    if d in (2, 3):
        order = np.argsort(points[:, 0], kind="mergesort")
        cols = [np.ascontiguousarray(points[order, ax]) for ax in range(d)]
        if d == 2:
            ys_all = np.sort(points[:, 1])
            ax, ay = _cube_kernels.lexmin_d2(cols[0], cols[1], ys_all, s, k, CLASSIFY_TOL)
            corner = np.array([ax, ay])
        else:
            ys_all = np.sort(points[:, 1])
            zs_all = np.sort(points[:, 2])
            ax, ay, az = _cube_kernels.lexmin_d3(
                cols[0], cols[1], cols[2], ys_all, zs_all, s, k, CLASSIFY_TOL
            )
            corner = np.array([ax, ay, az])
    else:
        corner = _lexmin_generic(points, s, k)
    if np.any(np.isnan(corner)):
        raise SeparatorError("no feasible anchored cube at the computed size")
    return corner


def _lexmin_generic(points: np.ndarray, s: float, k: int) -> np.ndarray:
    d = points.shape[1]
    uniques = [np.unique(points[:, ax]) for ax in range(d)]

    def rec(pts: np.ndarray, ax: int):
        if ax == d:
            return () if pts.shape[0] >= k else None
        for anchor in uniques[ax]:
            sub = pts[(pts[:, ax] >= anchor) & (pts[:, ax] <= anchor + s + CLASSIFY_TOL)]
            if sub.shape[0] >= k:
                tail = rec(sub, ax + 1)
                if tail is not None:
                    return (anchor,) + tail
        return None

    got = rec(points, 0)
    return np.array(got) if got is not None else np.full(d, np.nan)


def _min_quantile_cube(points: np.ndarray, k: int) -> Separator:
    """Smallest anchored cube (boundary) containing at least k of the points."""
    m = points.shape[0]
    if not 1 <= k <= m:
        raise SeparatorError(f"quantile threshold {k} out of range for {m} points")
    sizes = _candidate_sizes(points)
    if sizes.size == 0 or not _feasible(points, float(sizes[-1]), k):
        raise SeparatorError("no positive-size cube can hold the required quantile")
    lo, hi = 0, sizes.size - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _feasible(points, float(sizes[mid]), k):
            hi = mid
        else:
            lo = mid + 1
    s_star = float(sizes[lo])
    corner = _lexmin_corner(points, s_star, k)
    return Separator(center=corner + s_star / 2.0, size=s_star)


def smallest_quantile_cube(P: PointSet, Q: np.ndarray) -> Separator:
    """Minimum-size anchored cube holding at least ceil(|Q|/(4^d+1)) points of Q.

    Coincident points can make the minimum degenerate (size 0); the cube is
    then centered on the lexicographically smallest point location reaching
    the threshold, and callers that need a positive size must escalate the
    quantile themselves (build_separator does).
    """
    Q = np.asarray(Q, dtype=np.intp)
    if Q.size < 1:
        raise SeparatorError("quantile cube needs a nonempty pivot set")
    pts = P.coords[Q]
    k = quantile_threshold(Q.size, P.d)
    if _max_multiplicity(pts) >= k:
        rows = pts[np.lexsort(pts.T[::-1])]
        if k == 1:
            return Separator(center=rows[0], size=0.0)
        same = np.all(rows[1:] == rows[:-1], axis=1)
        run = 1
        for idx, flag in enumerate(same):
            run = run + 1 if flag else 1
            if run >= k:
                return Separator(center=rows[idx + 1], size=0.0)
    return _min_quantile_cube(pts, k)


def _weight_exponent_window(n: int, d: int, c_hi: float) -> tuple[int, int]:
    """Band indices whose weights escape the [1/n, c_hi*n] clamp."""
    i_lo = math.floor(-math.log(c_hi * n ** (1.0 - 1.0 / d)) / math.log(1.5)) - 1
    i_hi = math.ceil(math.log(n ** (1.0 + 1.0 / d)) / math.log(4.0)) + 1
    return i_lo, i_hi


def _weight_value(r: np.ndarray, n: int, d: int, c_hi: float) -> np.ndarray:
    """Truncated weight for relative distances r (vectorized)."""
    n_pow = n ** (1.0 / d)
    out = np.empty_like(r)
    zero = r <= 0.0
    out[zero] = c_hi * n
    nz = ~zero
    i = np.ceil(np.log2(r[nz] * n_pow) - 1e-12)
    w = np.where(i < 0, n_pow * 1.5 ** (-i), n_pow * 4.0 ** (-i))
    out[nz] = np.clip(w, 1.0 / n, c_hi * n)
    return out


def truncated_weight(p: np.ndarray, sigma_star: Separator, n: int, c_hi: float = 8.0) -> StepFunction:
    """Step function over t in [1, 3] of the truncated near-boundary weight of p.

    Weights grow geometrically as the scaled boundary approaches p and are
    clamped to [1/n, c_hi*n]; the clamp keeps the number of pieces
    logarithmic in n.
    """
    if sigma_star.size <= 0:
        raise SeparatorError("truncated_weight needs a positive-size cube")
    d = sigma_star.d
    u = float(np.max(np.abs(np.asarray(p, dtype=np.float64) - sigma_star.center)))
    t_p = u / sigma_star.half
    n_pow = n ** (1.0 / d)

    i_lo, i_hi = _weight_exponent_window(n, d, c_hi)
    cuts = [1.0, 3.0]
    if 1.0 < t_p < 3.0:
        cuts.append(t_p)
    if t_p > 0.0:
        for i in range(i_lo, i_hi + 1):
            theta = 2.0**i / n_pow
            t_dec = t_p / (1.0 + 2.0 * theta)
            if 1.0 < t_dec < 3.0:
                cuts.append(t_dec)
            if theta < 0.5:
                t_inc = t_p / (1.0 - 2.0 * theta)
                if 1.0 < t_inc < 3.0:
                    cuts.append(t_inc)
    boundaries = np.unique(np.asarray(cuts, dtype=np.float64))
    mids = (boundaries[:-1] + boundaries[1:]) / 2.0
    r = np.abs(1.0 - t_p / mids) / 2.0
    values = _weight_value(r, n, d, c_hi)
    return StepFunction(boundaries=boundaries, values=values)


def summed_truncated_weight(P: PointSet, sigma_star: Separator, c_hi: float = 8.0) -> StepFunction:
    """Sum over all points of the truncated weight step functions."""
    n = P.n
    step_fns = [truncated_weight(P.point(i), sigma_star, n, c_hi) for i in range(n)]
    interior = np.concatenate([f.boundaries[1:-1] for f in step_fns]) if step_fns else np.array([])
    boundaries = np.unique(np.concatenate([np.array([1.0, 3.0]), interior]))
    base = float(sum(f.values[0] for f in step_fns))
    delta_at = np.zeros(boundaries.shape[0], dtype=np.float64)
    for f in step_fns:
        if f.values.shape[0] > 1:
            pos = np.searchsorted(boundaries, f.boundaries[1:-1])
            np.add.at(delta_at, pos, np.diff(f.values))
    piece_values = base + np.cumsum(delta_at)[:-1]
    return StepFunction(boundaries=boundaries, values=piece_values)


def select_scaling(P: PointSet, sigma_star: Separator, c_hi: float = 8.0) -> float:
    """Scaling factor in [1, 3] minimizing the summed truncated weight.

    Candidates are every breakpoint of the summed step function plus every
    piece midpoint; ties resolve to the smallest t.
    """
    if sigma_star.size <= 0:
        raise SeparatorError("select_scaling needs a positive-size cube")
    total = summed_truncated_weight(P, sigma_star, c_hi)
    b, v = total.boundaries, total.values
    cand_t = [b[0]]
    cand_v = [v[0]]
    for j in range(v.shape[0]):
        cand_t.append((b[j] + b[j + 1]) / 2.0)
        cand_v.append(v[j])
        if j + 1 < v.shape[0]:
            cand_t.append(b[j + 1])
            cand_v.append(max(v[j], v[j + 1]))
    cand_t.append(b[-1])
    cand_v.append(v[-1])
    ts = np.asarray(cand_t)
    vs = np.asarray(cand_v)
    best = np.lexsort((ts, vs))[0]
    return float(ts[best])


def build_separator(P: PointSet, Q: np.ndarray, c_hi: float = 8.0) -> SeparatorChoice:
    """Balanced separator for pivot set Q with sparse point bands around it.

    The quantile is escalated past coincident-point degeneracies (and past
    the k=1 regime of very small pivot sets) so the base cube always has
    positive size; balance is asserted on the result.
    """
    Q = np.asarray(Q, dtype=np.intp)
    if Q.size < 2:
        raise SeparatorError("build_separator needs at least 2 pivot points; use the base case")
    pts = P.coords[Q]
    k0 = quantile_threshold(Q.size, P.d)
    k = max(k0, _max_multiplicity(pts) + 1, 2)
    if k > Q.size:
        raise SeparatorError("pivot set is entirely coincident; no separator exists")
    sigma_star = _min_quantile_cube(pts, k)
    t_bar = select_scaling(P, sigma_star, c_hi)
    sigma = scale(sigma_star, t_bar)

    inside = classify_points(PointSet(pts), sigma)
    n_in = int(np.count_nonzero(inside))
    n_out = int(Q.size - n_in)
    delta = balance_fraction(P.d)
    if max(n_in, n_out) > delta * Q.size + 1e-9:
        raise SeparatorError(
            f"separator is not balanced: ({n_in}, {n_out}) of {Q.size} exceeds {delta:.6f}"
        )

    i_min, i_max = band_range(P.n, P.d)
    band_sizes = {i: int(near_set(P, sigma, i).size) for i in range(i_min, i_max + 1)}
    return SeparatorChoice(
        sigma_star=sigma_star,
        t_bar=t_bar,
        sigma=sigma,
        balance_counts=(n_in, n_out),
        band_sizes=band_sizes,
        quantile_k=k,
    )
