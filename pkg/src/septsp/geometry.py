"""Points, hypercube-boundary separators, crossing tests, and distance bands.

A separator is the boundary of an axis-aligned hypercube.  It splits space
into a closed inside region (points inside or on the boundary) and an open
outside region.  All geometric predicates here use Euclidean coordinates,
regardless of the weight model used for tour lengths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Absolute tolerance for boundary ties in classification; a point exactly on
# the boundary (up to this tolerance) counts as inside.
CLASSIFY_TOL = 1e-12


class DegenerateSeparatorError(ValueError):
    """Raised when an operation needs a positive-size separator."""


@dataclass(frozen=True)
class PointSet:
    """An ordered list of points in R^d; index = identity (duplicates allowed)."""

    coords: np.ndarray  # shape (n, d), float64

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.coords, dtype=np.float64))
        if arr.ndim != 2:
            raise ValueError(f"coords must be 2-D, got shape {arr.shape}")
        if arr.shape[0] > 0 and arr.shape[1] < 2:
            raise ValueError(f"dimension must be >= 2, got {arr.shape[1]}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("coordinates must be finite")
        object.__setattr__(self, "coords", arr)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def d(self) -> int:
        return self.coords.shape[1]

    def point(self, i: int) -> np.ndarray:
        return self.coords[i]

    def take(self, indices) -> "PointSet":
        """Point set restricted to the given indices (new canonical identities)."""
        return PointSet(self.coords[np.asarray(indices, dtype=np.intp)])

    def __len__(self) -> int:
        return self.n


@dataclass(frozen=True)
class Separator:
    """Boundary of the axis-aligned hypercube [center - size/2, center + size/2]^d."""

    center: np.ndarray  # shape (d,)
    size: float

    def __post_init__(self):
        c = np.ascontiguousarray(np.asarray(self.center, dtype=np.float64))
        if c.ndim != 1:
            raise ValueError("center must be a 1-D coordinate vector")
        if not np.all(np.isfinite(c)) or not np.isfinite(self.size):
            raise ValueError("separator center and size must be finite")
        if self.size < 0:
            raise ValueError("separator size must be nonnegative")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "size", float(self.size))

    @property
    def d(self) -> int:
        return self.center.shape[0]

    @property
    def half(self) -> float:
        return self.size / 2.0


@dataclass(frozen=True)
class Segment:
    """A point-pair segment, identified by indices so duplicate points stay distinct."""

    a: int
    b: int
    length: float  # Euclidean length of the segment

    def __post_init__(self):
        if self.a == self.b:
            raise ValueError("segment endpoints must be distinct indices")


def chebyshev_from_center(p: np.ndarray, sigma: Separator) -> float:
    """L-infinity distance from p to the separator's center."""
    return float(np.max(np.abs(np.asarray(p, dtype=np.float64) - sigma.center)))


def rdist(p: np.ndarray, sigma: Separator) -> float:
    """Relative distance: L-infinity distance from p to the boundary, over the edge length.

    Equals |1 - t|/2 where t is the scaling factor with p on the boundary of
    the t-scaled separator.
    """
    if sigma.size <= 0:
        raise DegenerateSeparatorError("rdist undefined for size-0 separator")
    u = chebyshev_from_center(p, sigma)
    return abs(u - sigma.half) / sigma.size


def rdist_points(P: PointSet, sigma: Separator) -> np.ndarray:
    """Vectorized rdist over all points of P."""
    if sigma.size <= 0:
        raise DegenerateSeparatorError("rdist undefined for size-0 separator")
    u = np.max(np.abs(P.coords - sigma.center), axis=1)
    return np.abs(u - sigma.half) / sigma.size


def classify(p: np.ndarray, sigma: Separator) -> bool:
    """True when p is inside or on the separator (boundary ties resolve inside)."""
    u = chebyshev_from_center(p, sigma)
    return u <= sigma.half + CLASSIFY_TOL


def classify_points(P: PointSet, sigma: Separator) -> np.ndarray:
    """Vectorized classify: boolean array, True = inside or on."""
    u = np.max(np.abs(P.coords - sigma.center), axis=1)
    return u <= sigma.half + CLASSIFY_TOL


def scale(sigma: Separator, t: float) -> Separator:
    """Separator scaled by factor t >= 0 about its own center."""
    if t < 0:
        raise ValueError("scaling factor must be nonnegative")
    return Separator(center=sigma.center, size=t * sigma.size)


def crosses(s: Segment, sigma: Separator, P: PointSet) -> bool:
    """True when one endpoint is inside-or-on and the other strictly outside."""
    return classify(P.point(s.a), sigma) != classify(P.point(s.b), sigma)


def near_set(P: PointSet, sigma: Separator, i: int) -> np.ndarray:
    """Indices of points with rdist at most 2^i / n^(1/d).

    Monotone in i: near_set(i) is a subset of near_set(i + 1).
    """
    if P.n < 1:
        raise ValueError("near_set needs a nonempty point set")
    threshold = 2.0**i / P.n ** (1.0 / P.d)
    r = rdist_points(P, sigma)
    return np.flatnonzero(r <= threshold + CLASSIFY_TOL)


def segment_between(P: PointSet, a: int, b: int) -> Segment:
    """Segment between two point indices with its Euclidean length."""
    length = float(np.linalg.norm(P.point(a) - P.point(b)))
    return Segment(a=a, b=b, length=length)
