"""Axis-aligned box-union geometry: volumes, boundary distances, cube lattices.

Regions are finite unions of pairwise-disjoint axis-aligned boxes in d-space.
Membership is half-open ([lower, upper) per axis) so adjacent boxes tile
without double counting.  The integer-lattice covering of a dilated region
collects every unit cube that meets it; the packing collects every unit cube
contained in the closed union.  Cube counts sandwich the dilated volume:

    packing count  <=  lambda * |B|  <=  covering count.

The boundary/interior split cuts a region at l-infinity distance
s = stab_constant * lambda^(-1/d) * log(lambda) from its topological boundary
(shared faces of adjacent boxes are interior, not boundary).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Box",
    "Region",
    "LatticeParams",
    "CubeCover",
    "EmptyCoverError",
    "volume",
    "dist_to_boundary",
    "boundary_split",
    "covering",
    "packing",
]


class EmptyCoverError(ValueError):
    """Covering of a region produced no cubes (only possible for invalid input)."""


@dataclass(frozen=True)
class Box:
    """Axis-aligned box with strictly positive extent on every axis."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if len(lo) != len(hi) or len(lo) == 0:
            raise ValueError("box lower/upper must share a positive dimension")
        for a, b in zip(lo, hi):
            if not a < b:
                raise ValueError(f"box requires lower < upper per axis, got {lo} / {hi}")

    @property
    def dimension(self) -> int:
        return len(self.lower)

    @property
    def volume(self) -> float:
        v = 1.0
        for a, b in zip(self.lower, self.upper):
            v *= b - a
        return v

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Half-open membership test for an (n, d) array (or a single point)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        return np.all((pts >= lo) & (pts < hi), axis=1)


def _boxes_overlap(a: Box, b: Box) -> bool:
    # positive-measure overlap; shared faces do not count
    return all(max(al, bl) < min(au, bu)
               for al, au, bl, bu in zip(a.lower, a.upper, b.lower, b.upper))


@dataclass(frozen=True)
class Region:
    """Union of pairwise-disjoint boxes in a common dimension."""

    dimension: int
    boxes: tuple[Box, ...]

    def __post_init__(self):
        boxes = tuple(self.boxes)
        object.__setattr__(self, "boxes", boxes)
        if not boxes:
            raise ValueError("region needs at least one box")
        for b in boxes:
            if b.dimension != self.dimension:
                raise ValueError("box dimension mismatch in region")
        for i in range(len(boxes)):
            for j in range(i + 1, len(boxes)):
                if _boxes_overlap(boxes[i], boxes[j]):
                    raise ValueError(f"region boxes {i} and {j} overlap")

    @classmethod
    def from_bounds(cls, bounds: Iterable[tuple[Sequence[float], Sequence[float]]],
                    dimension: int | None = None) -> "Region":
        boxes = tuple(Box(tuple(lo), tuple(hi)) for lo, hi in bounds)
        d = dimension if dimension is not None else boxes[0].dimension
        return cls(dimension=d, boxes=boxes)

    @classmethod
    def interval(cls, a: float, b: float) -> "Region":
        return cls(dimension=1, boxes=(Box((a,), (b,)),))

    @property
    def volume(self) -> float:
        return sum(b.volume for b in self.boxes)

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        mask = np.zeros(len(pts), dtype=bool)
        for b in self.boxes:
            mask |= b.contains(pts)
        return mask

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.min([b.lower for b in self.boxes], axis=0)
        hi = np.max([b.upper for b in self.boxes], axis=0)
        return lo, hi

    def disjoint_from(self, other: "Region") -> bool:
        return not any(_boxes_overlap(a, b) for a in self.boxes for b in other.boxes)


def volume(region: Region) -> float:
    return region.volume


@dataclass(frozen=True)
class LatticeParams:
    """Intensity plus the boundary-width constant of the interior/boundary split."""

    lam: float
    stab_constant: float = 1.0

    def __post_init__(self):
        if not self.lam > 0.0:
            raise ValueError("lambda must be positive")
        if not self.stab_constant > 0.0:
            raise ValueError("stab_constant must be positive")

    def log_lambda_width(self, dimension: int) -> float:
        """Boundary half-width s = stab_constant * lambda^(-1/d) * log(lambda)."""
        return self.stab_constant * self.lam ** (-1.0 / dimension) * math.log(self.lam)


@dataclass(frozen=True)
class CubeCover:
    """Integer centers of unit cubes covering or packing a dilated region."""

    centers: np.ndarray  # (count, d) int64
    count: int
    kind: str  # "covering" | "packing"


# ---------------------------------------------------------------------------
# box subtraction: the workhorse for exact complement / containment tests

def _subtract(piece, cut):
    """Closed box minus closed box, as a list of closed boxes with positive extent."""
    plo, phi = piece
    clo = np.maximum(plo, cut[0])
    chi = np.minimum(phi, cut[1])
    if np.any(clo >= chi):
        return [piece]  # no positive-measure overlap
    out = []
    lo = plo.copy()
    hi = phi.copy()
    for j in range(len(plo)):
        if lo[j] < clo[j]:
            left_hi = hi.copy()
            left_hi[j] = clo[j]
            out.append((lo.copy(), left_hi))
        if chi[j] < hi[j]:
            right_lo = lo.copy()
            right_lo[j] = chi[j]
            out.append((right_lo, hi.copy()))
        lo[j] = clo[j]
        hi[j] = chi[j]
    return out


def _covered_by(piece, cuts) -> bool:
    """True if the closed box `piece` is covered by the closed boxes `cuts`
    (up to measure zero)."""
    pieces = [piece]
    for cut in cuts:
        nxt = []
        for p in pieces:
            nxt.extend(_subtract(p, cut))
        pieces = nxt
        if not pieces:
            return True
    return not pieces


def _complement_pieces(region: Region):
    """Closed boxes whose union is (the closure of) the complement of the
    region inside a frame inflated well beyond the region."""
    lo, hi = region.bounding_box()
    pad = float(np.max(hi - lo)) + 1.0
    frame = (lo - pad, hi + pad)
    pieces = [frame]
    for b in region.boxes:
        cut = (np.asarray(b.lower, dtype=float), np.asarray(b.upper, dtype=float))
        nxt = []
        for p in pieces:
            nxt.extend(_subtract(p, cut))
        pieces = nxt
    return frame, pieces


def _clamp_dist(points: np.ndarray, lo: np.ndarray, hi: np.ndarray, norm: str) -> np.ndarray:
    """Distance from each point to the closed box [lo, hi]."""
    excess = np.maximum(np.maximum(lo - points, points - hi), 0.0)
    if norm == "l2":
        return np.sqrt(np.sum(excess * excess, axis=1))
    return np.max(excess, axis=1)


def _normalize_norm(norm: str) -> str:
    key = norm.lower().replace("_", "").replace("-", "")
    if key in ("linf", "inf", "chebyshev"):
        return "linf"
    if key in ("l2", "euclidean", "2"):
        return "l2"
    raise ValueError(f"unknown norm {norm!r}; use 'l2' or 'linf'")


def dist_to_boundary(x, region: Region, norm: str = "linf") -> float:
    """Distance from x to the topological boundary of the region union.

    Works from either side: for x inside, this is the distance to the
    complement; for x outside, the distance to the region closure.  Shared
    faces of adjacent boxes are interior points of the union and carry
    positive distance.
    """
    return _dist_to_boundary_many(np.atleast_2d(np.asarray(x, dtype=float)),
                                  region, _normalize_norm(norm))[0]


def _dist_to_boundary_many(pts: np.ndarray, region: Region, norm: str,
                           complement=None) -> np.ndarray:
    if complement is None:
        frame, comp = _complement_pieces(region)
    else:
        frame, comp = complement
    d_region = np.full(len(pts), np.inf)
    for b in region.boxes:
        d_region = np.minimum(
            d_region,
            _clamp_dist(pts, np.asarray(b.lower), np.asarray(b.upper), norm))
    d_comp = np.full(len(pts), np.inf)
    for lo, hi in comp:
        d_comp = np.minimum(d_comp, _clamp_dist(pts, lo, hi, norm))
    # the true complement extends beyond the frame
    flo, fhi = frame
    inside_frame = np.all((pts >= flo) & (pts <= fhi), axis=1)
    exit_gap = np.min(np.minimum(pts - flo, fhi - pts), axis=1)
    d_comp = np.minimum(d_comp, np.where(inside_frame, exit_gap, 0.0))
    return np.maximum(d_region, d_comp)


def boundary_split(region: Region, params: LatticeParams
                   ) -> tuple[Callable, Callable]:
    """Membership predicates (interior, boundary) for the s-width split.

    A point of the region is boundary when its l-infinity distance to the
    region boundary is at most s = stab_constant * lambda^(-1/d) * log(lambda),
    interior otherwise; points outside the region are neither.  Requires
    lambda > 1 so that s > 0.
    """
    if not params.lam > 1.0:
        raise ValueError("boundary_split requires lambda > 1")
    s = params.log_lambda_width(region.dimension)
    complement = _complement_pieces(region)

    def _classify(points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        member = region.contains(pts)
        dist = _dist_to_boundary_many(pts, region, "linf", complement)
        return member, dist

    def interior(points):
        member, dist = _classify(points)
        out = member & (dist > s)
        return out if np.ndim(points) > 1 else bool(out[0])

    def boundary(points):
        member, dist = _classify(points)
        out = member & (dist <= s)
        return out if np.ndim(points) > 1 else bool(out[0])

    return interior, boundary


# ---------------------------------------------------------------------------
# unit-cube lattices of the dilated region

def _scaled_boxes(region: Region, lam: float):
    scale = float(lam) ** (1.0 / region.dimension)
    return [(scale * np.asarray(b.lower), scale * np.asarray(b.upper))
            for b in region.boxes]


def _center_range(lo: float, hi: float) -> range:
    # closed cube [z-1/2, z+1/2] meets half-open [lo, hi) iff lo <= z+1/2 and z-1/2 < hi
    z_lo = math.ceil(lo - 0.5)
    z_hi = math.ceil(hi + 0.5) - 1
    return range(z_lo, z_hi + 1)


def covering(region: Region, lam: float) -> CubeCover:
    """Integer centers whose closed unit cube meets the lambda^(1/d)-dilated region."""
    if not lam > 0.0:
        raise ValueError("lambda must be positive")
    d = region.dimension
    centers: set[tuple[int, ...]] = set()
    for lo, hi in _scaled_boxes(region, lam):
        ranges = [_center_range(lo[j], hi[j]) for j in range(d)]
        centers.update(itertools.product(*ranges))
    if not centers:
        raise EmptyCoverError("covering is empty; region has no volume")
    arr = np.array(sorted(centers), dtype=np.int64).reshape(len(centers), d)
    return CubeCover(centers=arr, count=len(centers), kind="covering")


def packing(region: Region, lam: float) -> CubeCover:
    """Integer centers whose closed unit cube lies inside the closed dilated union.

    A cube spanning several adjacent boxes counts when the closed union covers
    it; the test is exact up to measure-zero face slivers.
    """
    if not lam > 0.0:
        raise ValueError("lambda must be positive")
    d = region.dimension
    scaled = _scaled_boxes(region, lam)
    multi = len(scaled) > 1
    kept: list[tuple[int, ...]] = []
    seen: set[tuple[int, ...]] = set()
    for lo, hi in scaled:
        ranges = [_center_range(lo[j], hi[j]) for j in range(d)]
        for z in itertools.product(*ranges):
            if z in seen:
                continue
            seen.add(z)
            za = np.asarray(z, dtype=float)
            cube = (za - 0.5, za + 0.5)
            if np.all(cube[0] >= lo) and np.all(cube[1] <= hi):
                kept.append(z)
            elif multi and _covered_by(cube, scaled):
                kept.append(z)
    arr = (np.array(sorted(kept), dtype=np.int64).reshape(len(kept), d)
           if kept else np.empty((0, d), dtype=np.int64))
    return CubeCover(centers=arr, count=len(kept), kind="packing")
