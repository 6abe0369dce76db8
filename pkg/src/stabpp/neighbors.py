"""Nearest-neighbour search: sorted scan in 1-d, uniform-grid bucketing above.

The accelerated paths must return exactly the same neighbour sets as the
O(n^2) reference (`brute_force_knn`), which is kept as the test oracle.
Distance ties are broken by the canonical point order (generation index), so
both paths sort candidates by (distance, index).

The grid uses cells of side ~ (bounding volume / n)^(1/d) and expands in
Chebyshev rings around the query cell; a ring at cell-radius r can only hold
points at Euclidean distance >= (r - 1) * cell, which yields the stopping
rule once k candidates are at hand.
"""

from __future__ import annotations

import itertools

import numpy as np

__all__ = ["brute_force_knn", "knn_indices", "nn_distances", "UniformGridIndex"]


def _pair_dists(points: np.ndarray, x: np.ndarray) -> np.ndarray:
    diff = points - x
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def brute_force_knn(points: np.ndarray, k: int) -> np.ndarray:
    """Reference kNN: full pairwise distances, (n, k) neighbour indices."""
    n = len(points)
    if n - 1 < k:
        raise ValueError(f"need at least k+1={k + 1} points, got {n}")
    out = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        d = _pair_dists(points, points[i])
        d[i] = np.inf
        order = np.lexsort((np.arange(n), d))
        out[i] = order[:k]
    return out


def _knn_indices_1d(points: np.ndarray, k: int) -> np.ndarray:
    n = len(points)
    x = points[:, 0]
    order = np.argsort(x, kind="stable")
    xs = x[order]
    out = np.empty((n, k), dtype=np.int64)
    for pos in range(n):
        lo = max(0, pos - k)
        hi = min(n, pos + k + 1)
        cand = np.r_[np.arange(lo, pos), np.arange(pos + 1, hi)]
        d = np.abs(xs[cand] - xs[pos])
        orig = order[cand]
        sel = np.lexsort((orig, d))[:k]
        out[order[pos]] = orig[sel]
    return out


class UniformGridIndex:
    """Bucketed point index for kNN queries in dimension >= 2."""

    def __init__(self, points: np.ndarray, cell: float | None = None):
        pts = np.asarray(points, dtype=float)
        self.points = pts
        n, d = pts.shape
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        if cell is None:
            vol = float(np.prod(np.maximum(hi - lo, 1e-12)))
            cell = max((vol / max(n, 1)) ** (1.0 / d), 1e-12)
        self.cell = float(cell)
        self.origin = lo
        keys = np.floor((pts - lo) / self.cell).astype(np.int64)
        buckets: dict[tuple[int, ...], list[int]] = {}
        for i, key in enumerate(map(tuple, keys)):
            buckets.setdefault(key, []).append(i)
        self.buckets = {key: np.asarray(v, dtype=np.int64) for key, v in buckets.items()}
        self.key_lo = keys.min(axis=0)
        self.key_hi = keys.max(axis=0)
        self.dim = d

    def _ring_cells(self, center: np.ndarray, r: int):
        d = self.dim
        if r == 0:
            yield tuple(center)
            return
        for offset in itertools.product(range(-r, r + 1), repeat=d):
            if max(abs(o) for o in offset) != r:
                continue
            yield tuple(center + np.asarray(offset))

    def query(self, x, k: int, exclude: int = -1) -> np.ndarray:
        """Indices of the k nearest points to x, ties broken by index."""
        x = np.asarray(x, dtype=float)
        c0 = np.floor((x - self.origin) / self.cell).astype(np.int64)
        max_ring = int(np.max(np.maximum(self.key_hi - c0, c0 - self.key_lo))) + 1
        cand_idx: list[np.ndarray] = []
        cand_dist: list[np.ndarray] = []
        count = 0
        kth = np.inf
        for r in range(max_ring + 1):
            hit = [self.buckets[key] for key in self._ring_cells(c0, r)
                   if key in self.buckets]
            if hit:
                idx = np.concatenate(hit)
                if exclude >= 0:
                    idx = idx[idx != exclude]
                if len(idx):
                    dist = _pair_dists(self.points[idx], x)
                    cand_idx.append(idx)
                    cand_dist.append(dist)
                    count += len(idx)
            if count >= k:
                dist_all = np.concatenate(cand_dist)
                idx_all = np.concatenate(cand_idx)
                sel = np.lexsort((idx_all, dist_all))
                kth = dist_all[sel[k - 1]]
                # points beyond ring r are at distance >= r * cell
                if r * self.cell > kth:
                    return idx_all[sel[:k]]
        if count < k:
            raise ValueError(f"need at least k={k} other points, got {count}")
        dist_all = np.concatenate(cand_dist)
        idx_all = np.concatenate(cand_idx)
        sel = np.lexsort((idx_all, dist_all))
        return idx_all[sel[:k]]


def knn_indices(points: np.ndarray, k: int) -> np.ndarray:
    """(n, k) neighbour-index matrix via the dimension-appropriate fast path."""
    pts = np.asarray(points, dtype=float)
    n, d = pts.shape
    if n - 1 < k:
        raise ValueError(f"need at least k+1={k + 1} points, got {n}")
    if d == 1:
        return _knn_indices_1d(pts, k)
    grid = UniformGridIndex(pts)
    out = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        out[i] = grid.query(pts[i], k, exclude=i)
    return out


def nn_distances(points: np.ndarray, subset: np.ndarray | None = None) -> np.ndarray:
    """Distance from each point to its nearest other point.

    With ``subset`` (a boolean mask) only those rows are filled; the rest are
    NaN.  Neighbours are always searched in the full configuration.
    """
    pts = np.asarray(points, dtype=float)
    n, d = pts.shape
    if n < 2:
        raise ValueError("need at least 2 points")
    if d == 1:
        x = pts[:, 0]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        gaps = np.diff(xs)
        left = np.r_[np.inf, gaps]
        right = np.r_[gaps, np.inf]
        nn_sorted = np.minimum(left, right)
        out = np.empty(n)
        out[order] = nn_sorted
        if subset is not None:
            out = np.where(subset, out, np.nan)
        return out
    grid = UniformGridIndex(pts)
    out = np.full(n, np.nan)
    idx_iter = np.nonzero(subset)[0] if subset is not None else range(n)
    for i in idx_iter:
        j = grid.query(pts[i], 1, exclude=i)[0]
        out[i] = float(np.sqrt(np.sum((pts[i] - pts[j]) ** 2)))
    return out
