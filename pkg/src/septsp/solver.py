"""Exact TSP and path-cover solving by recursive separation.

The recursion solves "cover the points by minimum-length paths whose
endpoint pairing realizes a matching on the boundary set B", returning a
representative set of weighted boundary matchings.  Each level builds a
balanced separator, enumerates capped candidate sets of crossing segments,
recurses on both sides, joins side matchings that assemble into paths, and
reduces the collected matchings to a rank-bounded representative set.  A
tour is the special case of one boundary pair on a duplicated point.

Subproblems are keyed by (point indices, boundary indices) and memoized for
the lifetime of one solve; candidate tables are cached per (point set,
pivot-set) pair.  Both are pure caches: results are identical without them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _dp_kernels
from .candidates import (
    CandidateSet,
    PackingCaps,
    build_universe,
    combine_universe,
)
from .geometry import PointSet, Segment
from .matchings import (
    Matching,
    RepSet,
    all_matchings,
    canonical_matching,
    compatible_join,
    opt,
)
from .matchings import reduce as reduce_repset
from .separator import build_separator


class SolverError(ValueError):
    pass


def default_base_threshold(d: int) -> int:
    """Largest subproblem solved by the subset DP; recursion starts above it.

    For the planar case recursion starts at 4^d + 2 = 18 points, the
    smallest size where the quantile-cube construction is never forced
    degenerate by the duplicated tour point.
    """
    return 17 if d == 2 else 13


@dataclass(frozen=True)
class SolverConfig:
    gamma: float = 8.0  # boundary-vs-point balance pivot
    base_threshold: Optional[int] = None  # None: dimension default
    caps: PackingCaps = field(default_factory=PackingCaps)
    weight_model: str = "euclid"  # "euclid" | "matrix"
    workers: int = 1
    c_hi: float = 8.0  # upper clamp factor of the separator sweep

    def __post_init__(self):
        if self.gamma <= 0:
            raise SolverError("gamma must be positive")
        if self.weight_model not in ("euclid", "matrix"):
            raise SolverError(f"unknown weight model {self.weight_model!r}")
        if self.workers < 1:
            raise SolverError("workers must be >= 1")

    def n0(self, d: int) -> int:
        return self.base_threshold if self.base_threshold is not None else default_base_threshold(d)


@dataclass(frozen=True)
class EPCInstance:
    """A path-cover subproblem: points, boundary subset, matching on it."""

    points: PointSet
    boundary: tuple[int, ...]
    matching: Matching
    weights: Optional[np.ndarray] = None  # pairwise weights; None = Euclidean

    def __post_init__(self):
        b = tuple(sorted(int(x) for x in self.boundary))
        m = canonical_matching(self.matching)
        if len(b) % 2:
            raise SolverError("boundary size must be even")
        if any(not 0 <= x < self.points.n for x in b):
            raise SolverError("boundary indices out of range")
        if tuple(sorted(v for p in m for v in p)) != b:
            raise SolverError("matching must be perfect on the boundary")
        object.__setattr__(self, "boundary", b)
        object.__setattr__(self, "matching", m)


@dataclass(frozen=True)
class PathCover:
    paths: tuple[tuple[int, ...], ...]
    total_length: float


@dataclass(frozen=True)
class Tour:
    order: tuple[int, ...]
    length: float


@dataclass
class SolveStats:
    candidates_enumerated: int = 0
    max_boundary: int = 0
    nodes: int = 0
    base_cases: int = 0


def _pairwise_euclid(coords: np.ndarray) -> np.ndarray:
    diff = coords[:, None, :] - coords[None, :, :]
    return np.sqrt((diff**2).sum(-1))


class _Ctx:
    """Per-solve state: global points, weights, caches, counters."""

    def __init__(self, coords: np.ndarray, W: np.ndarray, cfg: SolverConfig):
        if coords.shape[0] > 64:
            raise SolverError("the solver supports at most 63 input points (64 with the tour copy)")
        self.points = PointSet(coords)
        self.W = W
        self.cfg = cfg
        self.memo: dict = {}
        self.enum_cache: dict = {}
        self.stats = SolveStats()

    def enum(self, p_key: tuple, q_key: tuple):
        got = self.enum_cache.get((p_key, q_key))
        if got is None:
            sub = self.points.take(list(p_key))
            q_local = np.searchsorted(np.asarray(p_key), np.asarray(q_key))
            choice = build_separator(sub, q_local, self.cfg.c_hi)
            uni = build_universe(sub, choice.sigma, self.cfg.caps)
            table = combine_universe(uni)
            got = (choice, uni, table)
            self.enum_cache[(p_key, q_key)] = got
        return got


def _bits_to_ids(bits: int, p_key: tuple) -> tuple[int, ...]:
    out = []
    i = 0
    while bits:
        if bits & 1:
            out.append(p_key[i])
        bits >>= 1
        i += 1
    return tuple(out)


def _acyclic(seg_pairs) -> bool:
    parent: dict[int, int] = {}

    def find(x):
        while parent.setdefault(x, x) != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in seg_pairs:
        ra, rb = find(a), find(b)
        if ra == rb:
            return False
        parent[ra] = rb
    return True


def _base_case(ctx: _Ctx, p_key: tuple, b_key: tuple) -> RepSet:
    ctx.stats.base_cases += 1
    m = len(p_key)
    rep = RepSet(b_key)
    if not b_key:
        if m == 0:
            rep.insert_min((), 0.0, ())
        return rep  # uncovered points admit no zero-path cover
    idx = np.asarray(p_key)
    W = np.ascontiguousarray(ctx.W[np.ix_(idx, idx)])
    pos = {g: i for i, g in enumerate(p_key)}
    b_local = {pos[g] for g in b_key}
    interior = np.array([i for i in range(m) if i not in b_local], dtype=np.int64)
    ipos = np.full(m, -1, dtype=np.int64)
    for i, p in enumerate(interior):
        ipos[p] = i
    for pairs in all_matchings(b_key):
        local = np.array([[pos[a], pos[b]] for a, b in pairs], dtype=np.int64)
        cost, edges = _dp_kernels.path_cover_dp(W, interior, ipos, local)
        if math.isfinite(cost):
            witness = tuple((p_key[a], p_key[b]) for a, b in edges)
            rep.insert_min(pairs, float(cost), witness)
    if len(rep) > rep.bound:
        rep = reduce_repset(rep)
    return rep


def _tsp_repr(ctx: _Ctx, p_key: tuple, b_key: tuple) -> RepSet:
    got = ctx.memo.get((p_key, b_key))
    if got is not None:
        return got
    ctx.stats.nodes += 1
    ctx.stats.max_boundary = max(ctx.stats.max_boundary, len(b_key))
    n_sub = len(p_key)
    d = ctx.points.d
    if n_sub <= ctx.cfg.n0(d):
        rep = _base_case(ctx, p_key, b_key)
        ctx.memo[(p_key, b_key)] = rep
        return rep

    if len(b_key) <= ctx.cfg.gamma * n_sub ** (1.0 - 1.0 / d):
        q_key = p_key
    else:
        q_key = b_key
    choice, uni, table = ctx.enum(p_key, q_key)
    ctx.stats.candidates_enumerated += table.p1.shape[0]

    pos = {g: i for i, g in enumerate(p_key)}
    in_bits = 0
    for i in range(n_sub):
        if uni.inside[i]:
            in_bits |= 1 << i
    b_bits = 0
    for g in b_key:
        b_bits |= 1 << pos[g]
    full_bits = (1 << n_sub) - 1

    b64 = np.uint64(b_bits)
    in64 = np.uint64(in_bits)
    ok_b = (table.p2 & b64) == 0
    beff = table.p1 ^ b64
    even_in = np.bitwise_count(beff & in64) % 2 == 0
    even_out = np.bitwise_count(beff & ~in64) % 2 == 0
    survivors = np.flatnonzero(ok_b & even_in & even_out)

    rep = RepSet(b_key)
    for r in survivors:
        sids = table.row_segments(int(r))
        seg_pairs = [(int(uni.seg_a[s]), int(uni.seg_b[s])) for s in sids]
        if not _acyclic(seg_pairs):
            continue
        p1r = int(table.p1[int(r)])
        p2r = int(table.p2[int(r)])
        consumed = (b_bits & p1r) | p2r
        alive = full_bits & ~consumed
        beff_r = (b_bits ^ p1r) & alive
        p_in_key = _bits_to_ids(alive & in_bits, p_key)
        b_in_key = _bits_to_ids(beff_r & in_bits, p_key)
        p_out_key = _bits_to_ids(alive & ~in_bits & full_bits, p_key)
        b_out_key = _bits_to_ids(beff_r & ~in_bits & full_bits, p_key)
        if len(p_in_key) >= n_sub or len(p_out_key) >= n_sub:
            raise SolverError("separator made no progress; this should be unreachable")
        r_in = _tsp_repr(ctx, p_in_key, b_in_key)
        if not r_in.entries:
            continue
        r_out = _tsp_repr(ctx, p_out_key, b_out_key)
        if not r_out.entries:
            continue
        segs_global = tuple(
            Segment(p_key[a], p_key[b], float(uni.seg_len[s]))
            for (a, b), s in zip(seg_pairs, sids)
        )
        w_s = float(sum(ctx.W[p_key[a], p_key[b]] for a, b in seg_pairs))
        deg: dict[int, int] = {}
        for s in segs_global:
            deg[s.a] = deg.get(s.a, 0) + 1
            deg[s.b] = deg.get(s.b, 0) + 1
        s_global = CandidateSet(
            segments=segs_global,
            p1=frozenset(p for p, c in deg.items() if c == 1),
            p2=frozenset(p for p, c in deg.items() if c == 2),
        )
        s_edges = tuple((s.a, s.b) for s in segs_global)
        for m_in in r_in.entries.values():
            for m_out in r_out.entries.values():
                joined = compatible_join(m_in.pairs, m_out.pairs, s_global, b_key)
                if joined is None:
                    continue
                rep.insert_min(
                    joined,
                    m_in.weight + w_s + m_out.weight,
                    m_in.witness + m_out.witness + s_edges,
                )
    if len(rep) > rep.bound:
        rep = reduce_repset(rep)
    ctx.memo[(p_key, b_key)] = rep
    return rep


def _build_weights(coords: np.ndarray, cfg: SolverConfig, weights: Optional[np.ndarray]) -> np.ndarray:
    if cfg.weight_model == "matrix":
        if weights is None:
            raise SolverError("matrix weight model needs a distance matrix")
        W = np.asarray(weights, dtype=np.float64)
        if W.shape != (coords.shape[0], coords.shape[0]):
            raise SolverError("distance matrix shape does not match the point count")
        return W
    return _pairwise_euclid(coords)


def tsp_repr(
    P: PointSet,
    B,
    cfg: Optional[SolverConfig] = None,
    weights: Optional[np.ndarray] = None,
) -> RepSet:
    """Representative set of weighted boundary matchings for (P, B)."""
    cfg = cfg or SolverConfig()
    b_key = tuple(sorted(int(x) for x in B))
    if len(b_key) % 2:
        raise SolverError("boundary size must be even")
    W = _build_weights(P.coords, cfg, weights)
    ctx = _Ctx(P.coords, W, cfg)
    return _tsp_repr(ctx, tuple(range(P.n)), b_key)


def base_case(inst: EPCInstance, cfg: Optional[SolverConfig] = None) -> RepSet:
    """Exact representative set by subset DP (all matchings of the boundary)."""
    cfg = cfg or SolverConfig(weight_model="matrix" if inst.weights is not None else "euclid")
    W = _build_weights(inst.points.coords, cfg, inst.weights)
    ctx = _Ctx(inst.points.coords, W, cfg)
    return _base_case(ctx, tuple(range(inst.points.n)), inst.boundary)


def _witness_paths(matching: Matching, witness) -> tuple[tuple[int, ...], ...]:
    adj: dict[int, list[int]] = {}
    for a, b in witness:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    paths = []
    for a, b in matching:
        path = [a]
        prev = None
        cur = a
        while cur != b:
            nbrs = adj[cur]
            nxt = nbrs[0] if nbrs[0] != prev or len(nbrs) == 1 else nbrs[1]
            prev, cur = cur, nxt
            path.append(cur)
        paths.append(tuple(path))
    return tuple(paths)


def path_cover(inst: EPCInstance, cfg: Optional[SolverConfig] = None) -> PathCover:
    """Minimum-total-length vertex-disjoint paths realizing the instance's matching.

    A single boundary pair routes through the recursive solver at any size;
    larger boundaries use the exact subset DP, which needs a small instance.
    """
    cfg = cfg or SolverConfig(weight_model="matrix" if inst.weights is not None else "euclid")
    W = _build_weights(inst.points.coords, cfg, inst.weights)
    if len(inst.boundary) == 2:
        rep = tsp_repr(inst.points, inst.boundary, cfg, inst.weights)
        entry = rep.entries.get(inst.matching)
        if entry is None:
            raise SolverError("the matching admits no path cover")
        paths = _witness_paths(inst.matching, entry.witness)
        return PathCover(paths=paths, total_length=entry.weight)
    if inst.points.n > 22:
        raise SolverError(
            "multi-pair path cover is solved by subset DP and supports at most 22 points"
        )
    ctx = _Ctx(inst.points.coords, W, cfg)
    rep = _base_case(ctx, tuple(range(inst.points.n)), inst.boundary)
    entry = rep.entries.get(inst.matching)
    if entry is None:
        # the reduce step may have dropped this matching; recompute it alone
        pos = {g: i for i, g in enumerate(range(inst.points.n))}
        interior = np.array(
            [i for i in range(inst.points.n) if i not in set(inst.boundary)], dtype=np.int64
        )
        ipos = np.full(inst.points.n, -1, dtype=np.int64)
        for i, p in enumerate(interior):
            ipos[p] = i
        local = np.array([[a, b] for a, b in inst.matching], dtype=np.int64)
        cost, edges = _dp_kernels.path_cover_dp(W, interior, ipos, local)
        if not math.isfinite(cost):
            raise SolverError("the matching admits no path cover")
        paths = _witness_paths(inst.matching, tuple((int(a), int(b)) for a, b in edges))
        return PathCover(paths=paths, total_length=float(cost))
    paths = _witness_paths(inst.matching, entry.witness)
    return PathCover(paths=paths, total_length=entry.weight)


def solve_tsp(
    P: PointSet,
    cfg: Optional[SolverConfig] = None,
    weights: Optional[np.ndarray] = None,
) -> Tour:
    tour, _ = solve_tsp_with_stats(P, cfg, weights)
    return tour


def solve_tsp_with_stats(
    P: PointSet,
    cfg: Optional[SolverConfig] = None,
    weights: Optional[np.ndarray] = None,
) -> tuple[Tour, SolveStats]:
    """Exact shortest tour plus solve statistics.

    The tour problem is reduced to path cover by duplicating point 0 and
    asking for one path between the copies; the copies' mutual weight is 0.
    In matrix mode the matrix must preserve the Euclidean distance order
    (checked up front).
    """
    cfg = cfg or SolverConfig()
    n = P.n
    if n < 3:
        raise SolverError("a tour needs at least 3 points")
    if cfg.weight_model == "matrix" or weights is not None:
        from .oracles import validate_order_preserving

        if weights is None:
            raise SolverError("matrix weight model needs a distance matrix")
        if not validate_order_preserving(P, weights):
            raise SolverError("distance matrix does not preserve the Euclidean order")
        cfg = SolverConfig(
            gamma=cfg.gamma,
            base_threshold=cfg.base_threshold,
            caps=cfg.caps,
            weight_model="matrix",
            workers=cfg.workers,
            c_hi=cfg.c_hi,
        )
        w_ext = np.zeros((n + 1, n + 1))
        w_ext[:n, :n] = np.asarray(weights, dtype=np.float64)
        w_ext[n, :n] = w_ext[0, :n]
        w_ext[:n, n] = w_ext[:n, 0]
    else:
        w_ext = None
    coords2 = np.vstack([P.coords, P.coords[0:1]])
    W = _build_weights(coords2, cfg, w_ext)
    ctx = _Ctx(coords2, W, cfg)
    rep = _tsp_repr(ctx, tuple(range(n + 1)), (0, n))
    m0 = canonical_matching([(0, n)])
    entry = rep.entries.get(m0)
    if entry is None:
        raise SolverError("no tour found; this should be unreachable for n >= 3")

    adj: dict[int, list[int]] = {}
    for a, b in entry.witness:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    # merge the copy back into point 0 and walk the cycle
    for x in adj.pop(n):
        adj.setdefault(0, []).append(x)
    order = [0]
    prev = None
    cur = 0
    for _ in range(n - 1):
        nbrs = adj[cur]
        nxt = nbrs[0] if nbrs[0] != prev else nbrs[1]
        order.append(nxt)
        prev, cur = cur, nxt
    if n > 2 and order[1] > order[-1]:
        order = [0] + order[:0:-1]
    tour = Tour(order=tuple(order), length=entry.weight)

    total = sum(float(W[order[i], order[(i + 1) % n]]) for i in range(n))
    if not math.isclose(total, tour.length, rel_tol=1e-9, abs_tol=1e-12):
        raise SolverError(f"tour re-score {total} disagrees with solver weight {tour.length}")
    return tour, ctx.stats
