"""Per-point scores and region statistics for nearest-neighbour graphs.

Two functional families are provided:

* ``nn_directed`` -- the score of a point is its nearest-neighbour distance
  raised to the weight exponent; the region statistic sums scores over points
  of the region (neighbours may lie outside it).
* ``knn_undirected`` -- the score is half the alpha-weighted length of the
  undirected k-nearest-neighbour-graph edges incident to the point, so the
  scores sum to the total alpha-weighted edge length of the graph.

The intensity-scaled statistic dilates the whole configuration by
lambda^(1/d) around the origin before scoring, then integrates the scores
against a bounded piecewise-constant test function evaluated at the original
locations.  In one dimension with an indicator test function the directed
statistic equals lambda^alpha times the unscaled region sum (homogeneity).

The stabilization probe estimates, per sampled location, the smallest dilated
radius such that rerandomizing the configuration outside the corresponding
ball leaves the score unchanged, and fits the exponential decay rate of the
radius tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import neighbors
from .point_process import (DensitySpec, PointConfiguration, generator,
                            sample_location, sample_poisson_rng)
from .regions import Region

__all__ = [
    "DIRECTED_NN",
    "KNN_UNDIRECTED",
    "FunctionalSpec",
    "TestFunctionSpec",
    "StatVector",
    "StabilizationProbeResult",
    "InsufficientPointsError",
    "nn_distance",
    "knn_neighbors",
    "xi_knn",
    "xi_directed_nn",
    "l_alpha",
    "t_statistic",
    "t_vector",
    "thresholded_t",
    "stabilization_probe",
]

DIRECTED_NN = "nn_directed"
KNN_UNDIRECTED = "knn_undirected"


class InsufficientPointsError(ValueError):
    """Configuration too small for the requested neighbour computation."""


@dataclass(frozen=True)
class FunctionalSpec:
    """Functional family, neighbour count, weight exponent, and intensity."""

    family: str = DIRECTED_NN
    k: int = 1
    alpha: float = 1.0
    lam: float = 1.0

    def __post_init__(self):
        if self.family not in (DIRECTED_NN, KNN_UNDIRECTED):
            raise ValueError(f"unknown functional family {self.family!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.family == DIRECTED_NN and self.k != 1:
            raise ValueError("directed nearest-neighbour functional fixes k = 1")
        if not self.alpha > 0.0:
            raise ValueError("alpha must be > 0")
        if not self.lam > 0.0:
            raise ValueError("lambda must be > 0")

    def with_lambda(self, lam: float) -> "FunctionalSpec":
        return replace(self, lam=float(lam))

    @property
    def min_points(self) -> int:
        return self.k + 1


@dataclass(frozen=True)
class TestFunctionSpec:
    """Bounded piecewise-constant test function supported on one region."""

    __test__ = False  # keep pytest from collecting this as a test class

    region: Region
    kind: str = "indicator"  # "indicator" | "piecewise"
    values: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("indicator", "piecewise"):
            raise ValueError(f"unknown test-function kind {self.kind!r}")
        if self.kind == "piecewise":
            if self.values is None or len(self.values) != len(self.region.boxes):
                raise ValueError("piecewise test function needs one value per box")
            object.__setattr__(self, "values",
                               tuple(float(v) for v in self.values))

    @property
    def bound(self) -> float:
        if self.kind == "indicator":
            return 1.0
        return max(abs(v) for v in self.values)

    def evaluate(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(len(pts))
        if self.kind == "indicator":
            out[self.region.contains(pts)] = 1.0
            return out
        for box, v in zip(self.region.boxes, self.values):
            out[box.contains(pts)] = v
        return out


@dataclass(frozen=True)
class StatVector:
    """Per-region scaled statistics from a single shared configuration."""

    values: np.ndarray  # (m,)
    lam: float
    spec: FunctionalSpec

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(v)):
            raise ValueError("statistic vector must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


# ---------------------------------------------------------------------------
# elementary scores

def nn_distance(x, config: PointConfiguration) -> float:
    """Euclidean distance from x to its nearest neighbour in the configuration.

    x itself (by exact coordinate equality) is excluded if present.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    pts = config.points
    others = pts[~np.all(pts == x, axis=1)]
    if len(others) < 1:
        raise InsufficientPointsError("no other point to measure against")
    diff = others - x
    return float(np.sqrt(np.min(np.einsum("ij,ij->i", diff, diff))))


def knn_neighbors(x, config: PointConfiguration, k: int) -> np.ndarray:
    """The k nearest points to x (excluding x), ties broken by generation order."""
    x = np.asarray(x, dtype=float).reshape(-1)
    pts = config.points
    self_mask = np.all(pts == x, axis=1)
    keep = np.nonzero(~self_mask)[0]
    if len(keep) < k:
        raise InsufficientPointsError(f"need at least k={k} other points")
    diff = pts[keep] - x
    dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    sel = np.lexsort((keep, dist))[:k]
    return pts[keep[sel]]


def _with_insertion(points: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, int]:
    """Append x unless an identical point exists; return (points, index of x)."""
    match = np.nonzero(np.all(points == x, axis=1))[0]
    if len(match):
        return points, int(match[0])
    return np.vstack([points, x]), len(points)


def _incident_half_weights(points: np.ndarray, k: int, alpha: float) -> np.ndarray:
    """Half the alpha-weighted incident edge length of the kNN graph, per point."""
    n = len(points)
    if n - 1 < k:
        raise InsufficientPointsError(f"need at least k+1={k + 1} points, got {n}")
    nbr = neighbors.knn_indices(points, k)
    src = np.repeat(np.arange(n), k)
    dst = nbr.ravel()
    u = np.minimum(src, dst)
    v = np.maximum(src, dst)
    edges = np.unique(u * n + v)
    eu, ev = edges // n, edges % n
    w = np.sqrt(np.sum((points[eu] - points[ev]) ** 2, axis=1)) ** alpha
    xi = np.zeros(n)
    np.add.at(xi, eu, 0.5 * w)
    np.add.at(xi, ev, 0.5 * w)
    return xi


def _incident_max_lengths(points: np.ndarray, k: int) -> np.ndarray:
    """Longest kNN-graph edge incident to each point (reverse edges included)."""
    n = len(points)
    nbr = neighbors.knn_indices(points, k)
    src = np.repeat(np.arange(n), k)
    dst = nbr.ravel()
    length = np.sqrt(np.sum((points[src] - points[dst]) ** 2, axis=1))
    out = np.zeros(n)
    np.maximum.at(out, src, length)
    np.maximum.at(out, dst, length)
    return out


def xi_knn(x, config: PointConfiguration, spec: FunctionalSpec) -> float:
    """Score of x under the undirected kNN family (x inserted if absent)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    pts, idx = _with_insertion(config.points, x)
    return float(_incident_half_weights(pts, spec.k, spec.alpha)[idx])


def xi_directed_nn(x, config: PointConfiguration, alpha: float) -> float:
    """Score of x under the directed family: nearest-neighbour distance ^ alpha."""
    return nn_distance(x, config) ** float(alpha)


def l_alpha(config: PointConfiguration, gamma: Region, alpha: float) -> float:
    """Sum of alpha-power nearest-neighbour distances over points in the region.

    Neighbours are searched in the whole configuration; an empty intersection
    with the region gives 0.
    """
    pts = config.points
    mask = gamma.contains(pts)
    if not mask.any():
        return 0.0
    if len(pts) < 2:
        raise InsufficientPointsError("region holds a point but the configuration has no pair")
    d = neighbors.nn_distances(pts, subset=mask)
    return float(np.sum(d[mask] ** float(alpha)))


# ---------------------------------------------------------------------------
# scaled region statistics

def _scaled_scores(config: PointConfiguration, spec: FunctionalSpec,
                   mask: np.ndarray) -> np.ndarray:
    """Scores of the dilated configuration at the masked points."""
    scale = spec.lam ** (1.0 / config.dimension)
    dilated = config.points * scale
    if spec.family == DIRECTED_NN:
        d = neighbors.nn_distances(dilated, subset=mask)
        return d[mask] ** spec.alpha
    return _incident_half_weights(dilated, spec.k, spec.alpha)[mask]


def _scaled_radii(config: PointConfiguration, spec: FunctionalSpec,
                  mask: np.ndarray) -> np.ndarray:
    """Empirical stabilization radii (dilated scale) at the masked points."""
    scale = spec.lam ** (1.0 / config.dimension)
    dilated = config.points * scale
    if spec.family == DIRECTED_NN:
        return neighbors.nn_distances(dilated, subset=mask)[mask]
    return _incident_max_lengths(dilated, spec.k)[mask]


def t_statistic(config: PointConfiguration, f: TestFunctionSpec,
                spec: FunctionalSpec) -> float:
    """Scaled region statistic: sum of dilated scores weighted by f.

    The configuration is dilated by lambda^(1/d); f is evaluated at the
    original locations, so only points of f's region contribute.
    """
    pts = config.points
    mask = f.region.contains(pts)
    if not mask.any():
        return 0.0
    if len(pts) < spec.min_points:
        raise InsufficientPointsError(
            f"{spec.family} needs at least {spec.min_points} points, got {len(pts)}")
    scores = _scaled_scores(config, spec, mask)
    return float(np.dot(scores, f.evaluate(pts[mask])))


def t_vector(config: PointConfiguration, fs, spec: FunctionalSpec) -> StatVector:
    """Componentwise t_statistic over test functions with disjoint regions."""
    fs = list(fs)
    for i in range(len(fs)):
        for j in range(i + 1, len(fs)):
            if not fs[i].region.disjoint_from(fs[j].region):
                raise ValueError(f"test-function regions {i} and {j} overlap")
    values = np.array([t_statistic(config, f, spec) for f in fs])
    return StatVector(values=values, lam=spec.lam, spec=spec)


def thresholded_t(config: PointConfiguration, f: TestFunctionSpec,
                  spec: FunctionalSpec, threshold: float) -> float:
    """t_statistic keeping only points whose empirical radius is <= threshold.

    For the directed family the radius is the dilated nearest-neighbour
    distance; for the kNN family the longest incident dilated edge.
    """
    if not threshold >= 0.0:
        raise ValueError("threshold must be nonnegative")
    pts = config.points
    mask = f.region.contains(pts)
    if not mask.any():
        return 0.0
    if len(pts) < spec.min_points:
        raise InsufficientPointsError(
            f"{spec.family} needs at least {spec.min_points} points, got {len(pts)}")
    scores = _scaled_scores(config, spec, mask)
    radii = _scaled_radii(config, spec, mask)
    keep = radii <= threshold
    return float(np.dot(scores[keep], f.evaluate(pts[mask][keep])))


# ---------------------------------------------------------------------------
# stabilization probe

@dataclass
class StabilizationProbeResult:
    """Empirical stabilization radii with tail estimates and decay fit."""

    radii: np.ndarray           # (probe_count,) dilated-scale radii
    censored: np.ndarray        # (probe_count,) bool, radius is a lower bound
    t_grid: np.ndarray
    tail_probs: np.ndarray      # P[R > t] with censored radii as lower bounds
    decay_slope: float
    r_squared: float
    fit_window: tuple[float, float] = (0.0, 0.0)
    meta: dict = field(default_factory=dict)


def _xi_at(x: np.ndarray, points: np.ndarray, spec: FunctionalSpec,
           dimension: int, evaluator=None) -> float:
    if evaluator is not None:
        return float(evaluator(x, points, spec))
    scale = spec.lam ** (1.0 / dimension)
    xd = x * scale
    if spec.family == DIRECTED_NN:
        diff = points * scale - xd
        d2 = np.einsum("ij,ij->i", diff, diff)
        d2 = d2[d2 > 0.0]
        if len(d2) == 0:
            raise InsufficientPointsError("probe point has no neighbour")
        return math.sqrt(float(d2.min())) ** spec.alpha
    pts, idx = _with_insertion(points * scale, xd)
    return float(_incident_half_weights(pts, spec.k, spec.alpha)[idx])


def stabilization_probe(density: DensitySpec, lam: float, spec: FunctionalSpec,
                        probe_count: int, resample_count: int, seed: int,
                        evaluator=None, stream_base: int = 1 << 40,
                        rel_tol: float = 1e-12) -> StabilizationProbeResult:
    """Estimate the stabilization-radius distribution by rerandomization.

    For each probe location x (drawn from the density), searches for the
    smallest dilated radius r such that the score at x is unchanged under
    ``resample_count`` independent redraws of every point outside the ball of
    radius r * lambda^(-1/d) around x.  Searches that hit the dilated region
    diameter without stabilizing are flagged censored and enter the tail
    estimate as lower bounds.
    """
    if probe_count < 1:
        raise ValueError("probe_count must be >= 1")
    if resample_count < 1:
        raise ValueError("resample_count must be >= 1")
    if not lam >= 1.0:
        raise ValueError("probe requires lambda >= 1")
    d = density.region.dimension
    spec = spec.with_lambda(lam)
    scale = lam ** (1.0 / d)
    lo, hi = density.region.bounding_box()
    diam = float(np.sqrt(np.sum((hi - lo) ** 2)))
    r_max = scale * diam + 1.0

    radii = np.empty(probe_count)
    censored = np.zeros(probe_count, dtype=bool)
    for i in range(probe_count):
        rng = generator(seed, stream_base + i)
        x = sample_location(density, rng)
        base = sample_poisson_rng(density, lam, rng)
        while len(base) < spec.min_points:
            base = sample_poisson_rng(density, lam, rng)
        xi0 = _xi_at(x, base, spec, d, evaluator)
        diff = base - x
        base_d2 = np.einsum("ij,ij->i", diff, diff)

        def invariant(r: float) -> bool:
            ball = base_d2 <= (r / scale) ** 2
            for _ in range(resample_count):
                fresh = sample_poisson_rng(density, lam, rng)
                fd = fresh - x
                outside = np.einsum("ij,ij->i", fd, fd) > (r / scale) ** 2
                mixed = np.vstack([base[ball], fresh[outside]])
                if len(mixed) < spec.min_points:
                    return False
                xi1 = _xi_at(x, mixed, spec, d, evaluator)
                if abs(xi1 - xi0) > rel_tol * max(1.0, abs(xi0)):
                    return False
            return True

        if invariant(0.0):
            radii[i] = 0.0
            continue
        hi_r = max(r_max / 1024.0, 1e-6)
        while hi_r < r_max and not invariant(hi_r):
            hi_r *= 2.0
        if hi_r >= r_max and not invariant(r_max):
            radii[i] = r_max
            censored[i] = True
            continue
        hi_r = min(hi_r, r_max)
        lo_r = 0.0
        for _ in range(18):
            mid = 0.5 * (lo_r + hi_r)
            if invariant(mid):
                hi_r = mid
            else:
                lo_r = mid
        radii[i] = hi_r

    t_grid = np.linspace(0.0, float(np.quantile(radii, 0.999)), 41)
    tail_probs = np.array([(radii > t).mean() for t in t_grid])
    meta = {"lambda": lam, "probe_count": probe_count,
            "resample_count": resample_count,
            "censored_count": int(censored.sum())}

    # fit log P[R > t] ~ slope * t over the informative tail
    min_prob = max(5.0 / probe_count, 1.0 / probe_count)
    sel = (tail_probs <= 0.5) & (tail_probs >= min_prob)
    if sel.sum() < 3:
        sel = tail_probs > 0.0
    if sel.sum() < 2:
        # every probe stabilized at (nearly) the same radius: no tail to fit
        meta["degenerate_tail"] = True
        return StabilizationProbeResult(
            radii=radii, censored=censored, t_grid=t_grid,
            tail_probs=tail_probs, decay_slope=0.0, r_squared=1.0, meta=meta)
    ts = t_grid[sel]
    ys = np.log(tail_probs[sel])
    slope, intercept = np.polyfit(ts, ys, 1)
    resid = ys - (slope * ts + intercept)
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return StabilizationProbeResult(
        radii=radii, censored=censored, t_grid=t_grid, tail_probs=tail_probs,
        decay_slope=float(slope), r_squared=r2,
        fit_window=(float(ts[0]), float(ts[-1])), meta=meta,
    )
