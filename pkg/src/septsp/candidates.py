"""Enumeration of crossing-segment candidate sets.

Segments crossing a separator are split by length into a short class, a
long class, and per-layer mid classes.  Mid segments are owned by a small
hypercube from a face grid of their layer (or the next layer up when the
layer's cubes cannot contain them; a single catch-all cube above the top
layer always can).  A candidate set picks at most a capped number of
segments from the short class, from the long class, and from each owning
cube, subject to every point having at most two incident segments.  The
stream is deterministic: classes in a fixed order, choices per class by
size then lexicographic segment order.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .geometry import (
    CLASSIFY_TOL,
    PointSet,
    Separator,
    Segment,
    classify_points,
    rdist_points,
)
from .separator import band_range


@dataclass(frozen=True)
class PackingCaps:
    """Per-class selection caps; the packing property makes O(1) caps sound."""

    c_cube: int = 3
    c_long: int = 3
    c_short: int = 6

    def __post_init__(self):
        if min(self.c_cube, self.c_long, self.c_short) < 1:
            raise ValueError("all packing caps must be >= 1")

    def doubled(self) -> "PackingCaps":
        return PackingCaps(2 * self.c_cube, 2 * self.c_long, 2 * self.c_short)


@dataclass(frozen=True)
class CandidateSet:
    """A set of segments crossing a separator, with endpoint-degree bookkeeping.

    p1/p2 are the points with exactly one / exactly two incident segments.
    The boundary-role fields are filled by restrict().
    """

    segments: tuple[Segment, ...]
    p1: frozenset[int]
    p2: frozenset[int]
    p_in: Optional[tuple[int, ...]] = None
    b_in: Optional[tuple[int, ...]] = None
    p_out: Optional[tuple[int, ...]] = None
    b_out: Optional[tuple[int, ...]] = None

    @property
    def total_length(self) -> float:
        return float(sum(s.length for s in self.segments))


def length_classes(sigma: Separator, n: int) -> tuple[float, int, int]:
    """Short-segment threshold (absolute) and the materialized band index range."""
    if n < 2:
        raise ValueError("length classes need n >= 2")
    if sigma.size <= 0:
        raise ValueError("length classes need a positive-size separator")
    d = sigma.d
    log32_2 = 1.0 / math.log2(1.5)
    l_small = sigma.size / (n ** (1.0 / d) * n ** ((1.0 - 1.0 / d) * log32_2))
    i_min, i_max = band_range(n, d)
    return l_small, i_min, i_max


def _cell_count(i: int, n: int, d: int) -> int:
    return max(1, math.ceil(n ** (1.0 / d) / 2.0**i - 1e-9))


def face_grid(sigma: Separator, i: int, n: int) -> np.ndarray:
    """Grid points on all 2d faces; cells have size 2^i/n^(1/d) (rounded to divide).

    Returned as a (m, d) array in lexicographic row order with duplicates
    (shared face edges) removed.
    """
    i_min, i_max = band_range(n, d := sigma.d)
    if not i_min <= i <= i_max:
        raise ValueError(f"band index {i} outside materialized range [{i_min}, {i_max}]")
    return _face_grid_raw(sigma, i, n)


def _face_grid_raw(sigma: Separator, i: int, n: int) -> np.ndarray:
    d = sigma.d
    m_cells = _cell_count(i, n, d)
    ticks = sigma.center[None, :] - sigma.half + sigma.size * np.arange(m_cells + 1)[:, None] / m_cells
    points = []
    for ax in range(d):
        for side in (-1.0, 1.0):
            axes = [ticks[:, a] for a in range(d)]
            axes[ax] = np.array([sigma.center[ax] + side * sigma.half])
            grid = np.meshgrid(*axes, indexing="ij")
            points.append(np.stack([g.ravel() for g in grid], axis=1))
    return np.unique(np.vstack(points), axis=0)


def cube_at(g: np.ndarray, i: int, n: int, sigma: Separator) -> Separator:
    """Hypercube of size 2^(i+1)/n^(1/d) (times size(sigma)) centered at grid point g."""
    d = sigma.d
    size = 2.0 ** (i + 1) / n ** (1.0 / d) * sigma.size
    return Separator(center=np.asarray(g, dtype=np.float64), size=size)


@dataclass
class _ChoiceClass:
    """All capped subsets of one segment group, in deterministic order."""

    kind: str  # "short" | "long" | "cube"
    key: tuple
    seg_ids: tuple[int, ...]
    choices: list[tuple[int, ...]]  # subsets of seg_ids, size <= cap, no point of degree > 2


@dataclass
class SegmentUniverse:
    """Classified crossing segments of one (point set, separator) pair."""

    sigma: Separator
    n: int
    inside: np.ndarray  # bool (n,)
    seg_a: np.ndarray  # (m,) int, canonical a < b
    seg_b: np.ndarray
    seg_len: np.ndarray  # Euclidean lengths
    classes: list[_ChoiceClass] = field(default_factory=list)

    def segment(self, sid: int) -> Segment:
        return Segment(int(self.seg_a[sid]), int(self.seg_b[sid]), float(self.seg_len[sid]))


def _subsets_with_degree_cap(seg_ids, seg_a, seg_b, cap, n) -> list[tuple[int, ...]]:
    """Subsets of seg_ids up to the cap, dropping any with a point of degree > 2."""
    out = [()]
    for size in range(1, min(cap, len(seg_ids)) + 1):
        for combo in itertools.combinations(seg_ids, size):
            deg = np.zeros(n, dtype=np.int8)
            for sid in combo:
                deg[seg_a[sid]] += 1
                deg[seg_b[sid]] += 1
            if deg.max() <= 2:
                out.append(combo)
    return out


def build_universe(P: PointSet, sigma: Separator, caps: PackingCaps) -> SegmentUniverse:
    """Classify crossing segments and build the per-class choice lists."""
    n = P.n
    inside = classify_points(P, sigma)
    in_idx = np.flatnonzero(inside)
    out_idx = np.flatnonzero(~inside)
    uni = SegmentUniverse(
        sigma=sigma,
        n=n,
        inside=inside,
        seg_a=np.empty(0, dtype=np.int64),
        seg_b=np.empty(0, dtype=np.int64),
        seg_len=np.empty(0, dtype=np.float64),
    )
    if in_idx.size == 0 or out_idx.size == 0:
        return uni

    ii, oo = np.meshgrid(in_idx, out_idx, indexing="ij")
    a = np.minimum(ii, oo).ravel()
    b = np.maximum(ii, oo).ravel()
    order = np.lexsort((b, a))
    a, b = a[order], b[order]
    lens = np.linalg.norm(P.coords[a] - P.coords[b], axis=1)
    uni.seg_a, uni.seg_b, uni.seg_len = a, b, lens

    l_small, i_min, i_max = length_classes(sigma, n)
    m = a.shape[0]
    short_ids = tuple(int(s) for s in np.flatnonzero(lens <= l_small + CLASSIFY_TOL))
    long_ids = tuple(int(s) for s in np.flatnonzero(lens > sigma.size + CLASSIFY_TOL))
    mid_ids = [s for s in range(m) if s not in set(short_ids) and s not in set(long_ids)]

    classes: list[_ChoiceClass] = []
    classes.append(
        _ChoiceClass(
            "short",
            ("short",),
            short_ids,
            _subsets_with_degree_cap(short_ids, a, b, caps.c_short, n),
        )
    )
    classes.append(
        _ChoiceClass(
            "long",
            ("long",),
            long_ids,
            _subsets_with_degree_cap(long_ids, a, b, caps.c_long, n),
        )
    )

    # mid segments: assign each to the lexicographically first containing cube
    # of its own layer, escalating one layer (the next layer always contains
    # it; a catch-all cube above the top layer backstops the escalation).
    if mid_ids:
        n_pow = n ** (1.0 / P.d)
        groups: dict[tuple, list[int]] = {}
        grids: dict[int, np.ndarray] = {}
        for sid in mid_ids:
            rel = lens[sid] / sigma.size
            layer = int(math.ceil(math.log2(rel * n_pow) - 1e-9))
            layer = max(i_min, min(layer, i_max))
            owner = None
            for j in range(layer, i_max + 2):
                if j > i_max:
                    key = (j, ("center",))
                    owner = key
                    break
                if j not in grids:
                    grids[j] = _face_grid_raw(sigma, j, n)
                half_j = 2.0**j / n_pow * sigma.size  # half of the layer-j cube size
                pa, pb = P.coords[a[sid]], P.coords[b[sid]]
                cheb = np.maximum(
                    np.max(np.abs(grids[j] - pa[None, :]), axis=1),
                    np.max(np.abs(grids[j] - pb[None, :]), axis=1),
                )
                hits = np.flatnonzero(cheb <= half_j + CLASSIFY_TOL)
                if hits.size:
                    g = grids[j][hits[0]]
                    owner = (j, tuple(float(x) for x in g))
                    break
            groups.setdefault(owner, []).append(sid)
        for key in sorted(groups):
            ids = tuple(groups[key])
            classes.append(
                _ChoiceClass("cube", key, ids, _subsets_with_degree_cap(ids, a, b, caps.c_cube, n))
            )

    # drop classes with no real choice to keep the product small
    uni.classes = [c for c in classes if len(c.choices) > 1]
    return uni


def _candidate_from_ids(uni: SegmentUniverse, sids: tuple[int, ...]) -> CandidateSet:
    deg = {}
    for sid in sids:
        for p in (int(uni.seg_a[sid]), int(uni.seg_b[sid])):
            deg[p] = deg.get(p, 0) + 1
    return CandidateSet(
        segments=tuple(uni.segment(s) for s in sids),
        p1=frozenset(p for p, c in deg.items() if c == 1),
        p2=frozenset(p for p, c in deg.items() if c == 2),
    )


def enumerate_crossing_sets(
    P: PointSet, sigma: Separator, caps: PackingCaps
) -> Iterator[CandidateSet]:
    """Stream every candidate crossing-segment set under the caps.

    Deterministic order; every streamed set has per-point degree at most two.
    With no crossing segments the stream is exactly the empty set.
    """
    uni = build_universe(P, sigma, caps)
    yield from _stream_universe(uni)


def _stream_universe(uni: SegmentUniverse) -> Iterator[CandidateSet]:
    classes = uni.classes
    n = uni.n
    deg = np.zeros(n, dtype=np.int8)

    def rec(ci: int, chosen: tuple[int, ...]) -> Iterator[CandidateSet]:
        if ci == len(classes):
            yield _candidate_from_ids(uni, chosen)
            return
        for combo in classes[ci].choices:
            ok = True
            touched = []
            for sid in combo:
                for p in (uni.seg_a[sid], uni.seg_b[sid]):
                    deg[p] += 1
                    touched.append(p)
                    if deg[p] > 2:
                        ok = False
            if ok:
                yield from rec(ci + 1, chosen + combo)
            for p in touched:
                deg[p] -= 1

    yield from rec(0, ())


def candidate_count(uni: SegmentUniverse) -> int:
    """Number of sets the stream yields (same pruning as the stream/table)."""
    table = combine_universe(uni)
    return table.p1.shape[0]


@dataclass
class CandidateTable:
    """All candidate sets of a universe as flat arrays (row order = stream order).

    Point-index sets are encoded as uint64 bitmasks over local indices, which
    caps table-backed solving at 64 points per subproblem.
    """

    uni: SegmentUniverse
    p1: np.ndarray  # (C,) uint64
    p2: np.ndarray  # (C,) uint64
    weight_geo: np.ndarray  # (C,) float64, Euclidean total length
    choice_idx: np.ndarray  # (C, n_classes) int32 into class choice lists

    def row_segments(self, r: int) -> tuple[int, ...]:
        out: tuple[int, ...] = ()
        for ci, cls in enumerate(self.uni.classes):
            out = out + cls.choices[self.choice_idx[r, ci]]
        return out


MAX_TABLE_ROWS = 6_000_000


def _class_arrays(uni: SegmentUniverse, cls: _ChoiceClass):
    masks_p1 = np.zeros(len(cls.choices), dtype=np.uint64)
    masks_p2 = np.zeros(len(cls.choices), dtype=np.uint64)
    w = np.zeros(len(cls.choices), dtype=np.float64)
    for idx, combo in enumerate(cls.choices):
        m1 = 0
        m2 = 0
        total = 0.0
        deg: dict[int, int] = {}
        for sid in combo:
            total += float(uni.seg_len[sid])
            for p in (int(uni.seg_a[sid]), int(uni.seg_b[sid])):
                deg[p] = deg.get(p, 0) + 1
        for p, c in deg.items():
            if c == 1:
                m1 |= 1 << p
            else:
                m2 |= 1 << p
        masks_p1[idx] = m1
        masks_p2[idx] = m2
        w[idx] = total
    return masks_p1, masks_p2, w


def combine_universe(uni: SegmentUniverse) -> CandidateTable:
    """Materialize the candidate stream as arrays (degree pruning folded in)."""
    if uni.n > 64:
        raise ValueError("bitmask candidate tables support at most 64 points")
    p1 = np.zeros(1, dtype=np.uint64)
    p2 = np.zeros(1, dtype=np.uint64)
    w = np.zeros(1, dtype=np.float64)
    idx = np.zeros((1, 0), dtype=np.int32)
    for ci, cls in enumerate(uni.classes):
        cp1, cp2, cw = _class_arrays(uni, cls)
        ca = p1.shape[0]
        cb = cp1.shape[0]
        if ca * cb > MAX_TABLE_ROWS:
            raise MemoryError(
                f"candidate table would exceed {MAX_TABLE_ROWS} rows; raise the base "
                "threshold or lower the caps"
            )
        ap1 = np.repeat(p1, cb)
        ap2 = np.repeat(p2, cb)
        aw = np.repeat(w, cb)
        bp1 = np.tile(cp1, ca)
        bp2 = np.tile(cp2, ca)
        bw = np.tile(cw, ca)
        # degree >2 iff a deg-2 point is touched again on the other side;
        # two deg-1 touches combine to deg-2, which is allowed
        conflict = (ap2 & (bp1 | bp2)) | (bp2 & ap1)
        keep = conflict == 0
        p2_all = ap2 | bp2 | (ap1 & bp1)
        new_p2 = p2_all[keep]
        new_p1 = ((ap1 ^ bp1) & ~p2_all)[keep]
        new_w = (aw + bw)[keep]
        new_idx = np.empty((int(keep.sum()), ci + 1), dtype=np.int32)
        new_idx[:, :ci] = np.repeat(idx, cb, axis=0)[keep]
        new_idx[:, ci] = np.tile(np.arange(cb, dtype=np.int32), ca)[keep]
        p1, p2, w, idx = new_p1, new_p2, new_w, new_idx
    return CandidateTable(uni=uni, p1=p1, p2=p2, weight_geo=w, choice_idx=idx)


def restrict(
    S: CandidateSet, B, P: PointSet, sigma: Separator
) -> Optional[CandidateSet]:
    """Apply boundary-degree and parity rules; annotate the in/out split.

    Rejects sets where a boundary point has two incident segments or where
    either side's boundary set would be odd.  Idempotent.
    """
    B = frozenset(int(x) for x in B)
    if B & S.p2:
        return None
    inside = classify_points(P, sigma)
    consumed = (B & S.p1) | S.p2
    b_eff = B ^ S.p1  # symmetric difference, disjoint from consumed
    p_in, b_in, p_out, b_out = [], [], [], []
    for p in range(P.n):
        if p in consumed:
            continue
        (p_in if inside[p] else p_out).append(p)
        if p in b_eff:
            (b_in if inside[p] else b_out).append(p)
    if len(b_in) % 2 or len(b_out) % 2:
        return None
    return CandidateSet(
        segments=S.segments,
        p1=S.p1,
        p2=S.p2,
        p_in=tuple(p_in),
        b_in=tuple(b_in),
        p_out=tuple(p_out),
        b_out=tuple(b_out),
    )


def packing_predicate(
    segments, caps: PackingCaps, witnesses, P: PointSet
) -> bool:
    """Check the two packing counts against every witness separator.

    For each witness: at most c_long crossing segments at least as long as
    the witness, and at most c_cube segments inside it of length at least a
    quarter of its size.
    """
    segs = list(segments)
    if not segs:
        return True
    a = np.array([s.a for s in segs])
    b = np.array([s.b for s in segs])
    lens = np.array([s.length for s in segs])
    pa = P.coords[a]
    pb = P.coords[b]
    for w in witnesses:
        ua = np.max(np.abs(pa - w.center), axis=1)
        ub = np.max(np.abs(pb - w.center), axis=1)
        in_a = ua <= w.half + CLASSIFY_TOL
        in_b = ub <= w.half + CLASSIFY_TOL
        crossing = in_a != in_b
        if np.count_nonzero(crossing & (lens >= w.size - CLASSIFY_TOL)) > caps.c_long:
            return False
        contained = in_a & in_b
        if np.count_nonzero(contained & (lens >= w.size / 4.0 - CLASSIFY_TOL)) > caps.c_cube:
            return False
    return True
