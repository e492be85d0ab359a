"""Perfect matchings on boundary sets and rank-based representative sets.

Matchings are canonical tuples of index pairs: each pair (lo, hi) sorted
internally, pairs sorted lexicographically.  A representative set keeps, for
every query matching M, the minimum weight over stored matchings whose union
with M is a single Hamiltonian cycle; reduce() shrinks the store to at most
2^(|B|-1) entries without changing any of those minima, via GF(2) row
reduction of the cut-consistency matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

import numpy as np

Matching = tuple[tuple[int, int], ...]


def canonical_matching(pairs: Iterable[tuple[int, int]]) -> Matching:
    return tuple(sorted((min(a, b), max(a, b)) for a, b in pairs))


def matching_vertices(m: Matching) -> tuple[int, ...]:
    return tuple(sorted(v for pair in m for v in pair))


def all_matchings(elements: Iterable[int]) -> Iterator[Matching]:
    """All perfect matchings of the elements, in deterministic order."""
    items = sorted(elements)
    if len(items) % 2:
        raise ValueError("perfect matchings need an even number of elements")

    def rec(rest: list[int]) -> Iterator[list[tuple[int, int]]]:
        if not rest:
            yield []
            return
        first = rest[0]
        for i in range(1, len(rest)):
            pair = (first, rest[i])
            for tail in rec(rest[1:i] + rest[i + 1 :]):
                yield [pair] + tail

    for pairing in rec(items):
        yield canonical_matching(pairing)


def fits(m1: Matching, m2: Matching) -> bool:
    """True when the union of the two matchings is a single Hamiltonian cycle.

    For a two-element boundary the unique matching fits itself: the doubled
    edge counts as the 2-cycle, which is what lets a tour close against the
    duplicated point.
    """
    verts = matching_vertices(m1)
    if verts != matching_vertices(m2):
        return False
    if len(verts) == 0:
        return False
    if len(verts) == 2:
        return m1 == m2
    nxt1 = {a: b for a, b in m1} | {b: a for a, b in m1}
    nxt2 = {a: b for a, b in m2} | {b: a for a, b in m2}
    # walk alternating edges starting anywhere; a single cycle visits all
    start = verts[0]
    seen = 1
    cur = nxt1[start]
    use_m2 = True
    while cur != start:
        seen += 1
        cur = (nxt2 if use_m2 else nxt1)[cur]
        use_m2 = not use_m2
    return seen == len(verts)


@dataclass(frozen=True)
class WeightedMatching:
    pairs: Matching
    weight: float
    witness: tuple[tuple[int, int], ...]  # edges of the realizing path cover

    def __post_init__(self):
        object.__setattr__(self, "pairs", canonical_matching(self.pairs))
        object.__setattr__(
            self, "witness", tuple(sorted((min(a, b), max(a, b)) for a, b in self.witness))
        )


class RepSet:
    """Weighted matchings over a common boundary, minimum weight per matching."""

    def __init__(self, boundary: Iterable[int]):
        self.boundary: tuple[int, ...] = tuple(sorted(int(b) for b in boundary))
        if len(self.boundary) % 2:
            raise ValueError("boundary must have even size")
        self.entries: dict[Matching, WeightedMatching] = {}

    @property
    def bound(self) -> int:
        return 1 << max(len(self.boundary) - 1, 0)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[WeightedMatching]:
        return iter(self.entries.values())

    def insert_min(self, pairs: Matching, weight: float, witness) -> None:
        """Keep the lighter entry per matching; ties resolve by witness encoding."""
        wm = WeightedMatching(pairs=pairs, weight=weight, witness=tuple(witness))
        cur = self.entries.get(wm.pairs)
        if cur is None or (wm.weight, wm.witness) < (cur.weight, cur.witness):
            self.entries[wm.pairs] = wm

    def sorted_entries(self) -> list[WeightedMatching]:
        return sorted(self.entries.values(), key=lambda e: (e.weight, e.pairs))


def insert_min(rep: RepSet, pairs: Matching, weight: float, witness) -> None:
    rep.insert_min(pairs, weight, witness)


def opt(m: Matching, rep: RepSet) -> float:
    """Minimum stored weight over entries fitting m; +inf when none fits."""
    best = float("inf")
    for entry in rep.entries.values():
        if entry.weight < best and fits(entry.pairs, m):
            best = entry.weight
    return best


def _pair_agree_masks(b_size: int) -> dict[tuple[int, int], int]:
    """For each position pair, the bitset of cuts putting both on one side."""
    n_cuts = 1 << (b_size - 1)
    xs = np.arange(n_cuts, dtype=np.uint64)
    sides = np.zeros((b_size, n_cuts), dtype=bool)
    for i in range(1, b_size):
        sides[i] = (xs >> np.uint64(i - 1)) & np.uint64(1) == 1
    out = {}
    for i in range(b_size):
        for j in range(i + 1, b_size):
            agree = sides[i] == sides[j]
            out[(i, j)] = int.from_bytes(np.packbits(agree, bitorder="little").tobytes(), "little")
    return out


def reduce(rep: RepSet) -> RepSet:
    """Representative subset of at most 2^(|B|-1) entries with identical opt().

    Entries are scanned by increasing weight; one is kept iff its
    cut-consistency row enlarges the GF(2) row space of those kept so far.
    """
    b = rep.boundary
    if len(rep) <= 1 or len(b) == 0:
        return rep
    if len(b) > 26:
        raise ValueError("reduce supports boundaries of at most 26 points")
    pos = {v: i for i, v in enumerate(b)}
    agree = _pair_agree_masks(len(b))
    out = RepSet(b)
    basis: list[int] = []  # reduced rows, each with a unique pivot bit
    full = (1 << (1 << (len(b) - 1))) - 1
    for entry in rep.sorted_entries():
        row = full
        for a_, b_ in entry.pairs:
            i, j = sorted((pos[a_], pos[b_]))
            row &= agree[(i, j)]
        cur = row
        for base in basis:
            nxt = cur ^ base
            if nxt < cur:
                cur = nxt
        if cur:
            basis.append(cur)
            basis.sort(reverse=True)
            out.entries[entry.pairs] = entry
    return out


def compatible_join(
    m_in: Matching, m_out: Matching, S, B: Iterable[int]
) -> Optional[Matching]:
    """Matching induced on B when the two side matchings and the crossing set
    assemble into exactly |B|/2 disjoint paths with endpoint set B.

    Returns None when the union contains a cycle or stray structure.
    """
    B = sorted(int(x) for x in B)
    edges: list[tuple[int, int]] = list(m_in) + list(m_out)
    edges += [(s.a, s.b) for s in S.segments]
    verts = set(B) | set(S.p1) | set(S.p2)
    adj: dict[int, list[int]] = {v: [] for v in verts}
    for a, b in edges:
        if a not in adj or b not in adj:
            return None
        adj[a].append(b)
        adj[b].append(a)
    if any(len(nb) > 2 for nb in adj.values()):
        return None
    b_set = set(B)
    deg1 = [v for v, nb in adj.items() if len(nb) == 1]
    if sorted(deg1) != B:
        return None
    # walk each path from one endpoint; anything left over is a cycle
    seen: set[int] = set()
    pairs = []
    for v in deg1:
        if v in seen:
            continue
        seen.add(v)
        prev, cur = v, adj[v][0] if adj[v] else None
        while cur is not None and len(adj[cur]) == 2:
            seen.add(cur)
            a, bb = adj[cur]
            nxt = a if a != prev else bb
            prev, cur = cur, nxt
        if cur is None or cur in seen and cur != v:
            return None
        seen.add(cur)
        if cur not in b_set:
            return None
        pairs.append((v, cur))
    if len(seen) != len(verts):
        return None  # leftover vertices form cycles
    return canonical_matching(pairs)
