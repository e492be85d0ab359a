"""Ground-truth solvers, instance generators, and instance file I/O.

Everything here is deliberately independent of the recursive solver so it
can serve as its oracle: Held-Karp for tours, a memoized subset recursion
for path covers, and seeded generators for reproducible instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Optional

import numpy as np

from . import _dp_kernels
from .geometry import PointSet
from .solver import EPCInstance, PathCover, Tour


@dataclass(frozen=True)
class Instance:
    """Points plus a weight model (Euclidean, or an order-preserving matrix)."""

    points: PointSet
    matrix: Optional[np.ndarray] = None
    name: str = ""
    seed: Optional[int] = None

    def __post_init__(self):
        if self.matrix is not None:
            m = np.asarray(self.matrix, dtype=np.float64)
            if m.shape != (self.points.n, self.points.n):
                raise ValueError("distance matrix shape must match the point count")
            object.__setattr__(self, "matrix", m)

    @property
    def model(self) -> str:
        return "euclid" if self.matrix is None else "matrix"

    @property
    def n(self) -> int:
        return self.points.n

    @property
    def d(self) -> int:
        return self.points.d


def weight_matrix(inst: Instance) -> np.ndarray:
    if inst.matrix is not None:
        return inst.matrix
    diff = inst.points.coords[:, None, :] - inst.points.coords[None, :, :]
    return np.sqrt((diff**2).sum(-1))


def _canonical_cycle(order: np.ndarray) -> tuple[int, ...]:
    order = list(int(x) for x in order)
    i0 = order.index(0)
    order = order[i0:] + order[:i0]
    if len(order) > 2 and order[1] > order[-1]:
        order = [0] + order[:0:-1]
    return tuple(order)


def held_karp(inst: Instance) -> Tour:
    """Exact tour by bitmask dynamic programming; limited to 3 <= n <= 24.

    The 64-bit subset masks and the O(2^n * n) tables cap n at 24 (the
    tables alone are several gigabytes there).
    """
    n = inst.n
    if not 3 <= n <= 24:
        raise ValueError("held_karp supports 3 <= n <= 24")
    W = weight_matrix(inst)
    length, order = _dp_kernels.held_karp_dp(np.ascontiguousarray(W))
    tour = Tour(order=_canonical_cycle(order), length=float(length))
    total = sum(W[tour.order[i], tour.order[(i + 1) % n]] for i in range(n))
    assert math.isclose(total, tour.length, rel_tol=1e-9, abs_tol=1e-12)
    return tour


def brute_path_cover(inst: EPCInstance) -> PathCover:
    """Exact minimum path cover by a memoized subset recursion (n <= 14)."""
    n = inst.points.n
    if n > 14:
        raise ValueError("brute_path_cover supports at most 14 points")
    if not inst.boundary:
        if n == 0:
            return PathCover(paths=(), total_length=0.0)
        raise ValueError("no paths can cover a nonempty point set")
    if inst.weights is not None:
        W = np.asarray(inst.weights, dtype=np.float64)
    else:
        W = weight_matrix(Instance(points=inst.points))
    pairs = list(inst.matching)
    b_set = set(inst.boundary)
    interior = [i for i in range(n) if i not in b_set]
    bit = {p: 1 << i for i, p in enumerate(interior)}
    full = (1 << len(interior)) - 1
    INF = float("inf")

    @lru_cache(maxsize=None)
    def go(j: int, rem: int, head: int) -> float:
        close = W[head, pairs[j][1]]
        if j + 1 < len(pairs):
            best = close + go(j + 1, rem, pairs[j + 1][0])
        else:
            best = close if rem == 0 else INF
        for u in interior:
            if rem & bit[u]:
                cand = W[head, u] + go(j, rem & ~bit[u], u)
                if cand < best:
                    best = cand
        return best

    total = go(0, full, pairs[0][0])
    if not math.isfinite(total):
        raise ValueError("the matching admits no path cover")

    # replay the recursion to extract the actual paths
    paths = []
    j, rem, head = 0, full, pairs[0][0]
    path = [head]
    while True:
        close = W[head, pairs[j][1]]
        rest = (
            go(j + 1, rem, pairs[j + 1][0])
            if j + 1 < len(pairs)
            else (0.0 if rem == 0 else INF)
        )
        here = go(j, rem, head)
        if math.isclose(close + rest, here, rel_tol=1e-12, abs_tol=1e-12):
            path.append(pairs[j][1])
            paths.append(tuple(path))
            if j + 1 == len(pairs):
                break
            j += 1
            head = pairs[j][0]
            path = [head]
            continue
        for u in interior:
            if rem & bit[u] and math.isclose(
                W[head, u] + go(j, rem & ~bit[u], u), here, rel_tol=1e-12, abs_tol=1e-12
            ):
                path.append(u)
                rem &= ~bit[u]
                head = u
                break
        else:
            raise AssertionError("path reconstruction lost the optimum")
    go.cache_clear()
    return PathCover(paths=tuple(paths), total_length=float(total))


def gen(kind: str, n: int, d: int, seed: int) -> Instance:
    """Seeded instance generator: uniform cube, integer grid, or Gaussian blobs."""
    if n < 1 or d not in (2, 3, 4):
        raise ValueError("gen needs n >= 1 and d in {2, 3, 4}")
    rng = np.random.default_rng(seed)
    if kind == "uniform":
        pts = rng.random((n, d))
    elif kind == "grid":
        side = math.ceil(n ** (1.0 / d))
        axes = [np.arange(1, side + 1, dtype=np.float64)] * d
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)[:n]
    elif kind == "clustered":
        k = max(1, n // 8)
        centers = rng.random((k, d))
        assign = np.arange(n) % k
        pts = centers[assign] + rng.normal(0.0, 0.05, (n, d))
    else:
        raise ValueError(f"unknown instance kind {kind!r}")
    return Instance(points=PointSet(pts), name=f"{kind}-n{n}-d{d}-s{seed}", seed=seed)


def validate_order_preserving(P: PointSet, D: np.ndarray) -> bool:
    """True when D strictly preserves the order of distinct Euclidean distances.

    Pairs tied in Euclidean distance impose no constraint on each other.
    Raises on malformed matrices (wrong shape, asymmetric, nonzero diagonal,
    non-finite entries).
    """
    D = np.asarray(D, dtype=np.float64)
    n = P.n
    if D.shape != (n, n):
        raise ValueError("distance matrix must be n x n")
    if not np.all(np.isfinite(D)):
        raise ValueError("distance matrix must be finite")
    if not np.array_equal(D, D.T):
        raise ValueError("distance matrix must be symmetric")
    if np.any(np.diag(D) != 0.0):
        raise ValueError("distance matrix must have a zero diagonal")
    if n < 2:
        return True
    iu = np.triu_indices(n, 1)
    diff = P.coords[:, None, :] - P.coords[None, :, :]
    e = np.sqrt((diff**2).sum(-1))[iu]
    dv = D[iu]
    order = np.argsort(e, kind="mergesort")
    e, dv = e[order], dv[order]
    prev_max = -np.inf
    i = 0
    while i < e.size:
        j = i
        while j < e.size and e[j] == e[i]:
            j += 1
        cur_min = dv[i:j].min()
        if cur_min <= prev_max:
            return False
        prev_max = max(prev_max, dv[i:j].max())
        i = j
    return True


def perturb_matrix(P: PointSet, seed: int, epsilon: float) -> np.ndarray:
    """Order-preserving distance matrix: Euclidean distances plus bounded jitter.

    The jitter per pair stays within epsilon/2 times the smallest gap between
    consecutive distinct Euclidean values (counting the gap down to zero), so
    strict distance orderings survive for any epsilon < 1.
    """
    if not 0.0 <= epsilon < 1.0:
        raise ValueError("epsilon must be in [0, 1)")
    n = P.n
    diff = P.coords[:, None, :] - P.coords[None, :, :]
    E = np.sqrt((diff**2).sum(-1))
    if n < 2 or epsilon == 0.0:
        return E
    iu = np.triu_indices(n, 1)
    distinct = np.unique(E[iu])
    gaps = np.diff(np.concatenate([[0.0], distinct]))
    g = float(gaps[gaps > 0].min())
    rng = np.random.default_rng(seed)
    jitter = rng.uniform(-0.5, 0.5, size=iu[0].size) * epsilon * g
    D = E.copy()
    D[iu] += jitter
    D.T[iu] = D[iu]
    if not validate_order_preserving(P, D):
        raise AssertionError("perturbation broke the distance order")
    return D


# --- instance files ---------------------------------------------------------

_HEADER = "tsp-instance v1"


def write_instance(inst: Instance, path) -> None:
    lines = [f"{_HEADER} d={inst.d} n={inst.n} model={inst.model}"]
    for row in inst.points.coords:
        lines.append(" ".join(f"{x:.17g}" for x in row))
    if inst.matrix is not None:
        for row in inst.matrix:
            lines.append(" ".join(f"{x:.17g}" for x in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


class InstanceFormatError(ValueError):
    pass


def read_instance(path) -> Instance:
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith(_HEADER):
        raise InstanceFormatError("missing 'tsp-instance v1' header")
    fields = dict(part.split("=", 1) for part in lines[0][len(_HEADER) :].split())
    try:
        d = int(fields["d"])
        n = int(fields["n"])
        model = fields["model"]
    except (KeyError, ValueError) as exc:
        raise InstanceFormatError(f"bad header fields: {exc}") from exc
    if model not in ("euclid", "matrix"):
        raise InstanceFormatError(f"unknown model {model!r}")
    need = n + (n if model == "matrix" else 0)
    body = lines[1:]
    if len(body) != need:
        raise InstanceFormatError(f"expected {need} data lines, found {len(body)}")
    try:
        coords = np.array([[float(x) for x in ln.split()] for ln in body[:n]])
        matrix = (
            np.array([[float(x) for x in ln.split()] for ln in body[n:]])
            if model == "matrix"
            else None
        )
    except ValueError as exc:
        raise InstanceFormatError(f"bad numeric data: {exc}") from exc
    if coords.shape != (n, d):
        raise InstanceFormatError("coordinate block has the wrong shape")
    if matrix is not None and matrix.shape != (n, n):
        raise InstanceFormatError("matrix block has the wrong shape")
    return Instance(points=PointSet(coords), matrix=matrix, name=str(Path(path).stem))


def read_tsplib(path) -> Instance:
    """Import TSPLIB NODE_COORD_SECTION files (EUC_2D / EUC_3D only)."""
    name = ""
    ewt = ""
    coords = []
    in_coords = False
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.upper() == "EOF":
            continue
        upper = line.upper()
        if upper.startswith("NAME"):
            name = line.split(":", 1)[1].strip() if ":" in line else ""
        elif upper.startswith("EDGE_WEIGHT_TYPE"):
            ewt = line.split(":", 1)[1].strip().upper()
        elif upper == "NODE_COORD_SECTION":
            in_coords = True
        elif in_coords and upper not in ("DISPLAY_DATA_SECTION",):
            parts = line.split()
            if len(parts) >= 3:
                coords.append([float(x) for x in parts[1:]])
    if ewt not in ("EUC_2D", "EUC_3D"):
        raise InstanceFormatError(f"unsupported EDGE_WEIGHT_TYPE {ewt!r}; only EUC_2D/EUC_3D")
    if not coords:
        raise InstanceFormatError("no NODE_COORD_SECTION data found")
    return Instance(points=PointSet(np.array(coords)), name=name or Path(path).stem)
