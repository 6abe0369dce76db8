"""Reproducible sampling of Poisson, binomial, and homogeneous line processes.

All samplers are pure functions of (seed, stream): the random stream is a
counter-based Philox generator keyed by the 64-bit seed and the stream id, so
distinct streams can be drawn concurrently with no coordination and replaying
a (seed, stream) pair reproduces the configuration bit for bit.

Densities are piecewise constant over the boxes of a region.  A Poisson
sample draws an independent Poisson count per box with mean
lambda * weight * |box| and scatters that many uniform points in the box;
boxes are processed in their canonical order and the configuration keeps
generation order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .regions import Box, Region

__all__ = [
    "DensitySpec",
    "PointConfiguration",
    "generator",
    "sample_poisson",
    "sample_binomial",
    "sample_homogeneous_line",
]

_MASK64 = (1 << 64) - 1


def generator(seed: int, stream: int) -> np.random.Generator:
    """Counter-based generator addressed by (seed, stream)."""
    if stream < 0:
        raise ValueError("stream id must be nonnegative")
    key = np.array([int(seed) & _MASK64, int(stream) & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class DensitySpec:
    """Piecewise-constant density on a region: one nonnegative weight per box.

    With ``normalized=True`` the weights must integrate to 1 (a probability
    density); ``normalized=False`` admits any finite nonnegative intensity
    profile, e.g. constant 1 per box over several unit intervals.
    """

    region: Region
    weights: tuple[float, ...]
    normalized: bool = True

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        object.__setattr__(self, "weights", w)
        if len(w) != len(self.region.boxes):
            raise ValueError("need exactly one weight per region box")
        if any(v < 0.0 for v in w):
            raise ValueError("density weights must be nonnegative")
        if not any(v > 0.0 for v in w):
            raise ValueError("density must be positive somewhere")
        if self.normalized and abs(self.total_mass - 1.0) > 1e-9:
            raise ValueError(
                f"probability density must integrate to 1, got {self.total_mass}"
            )

    @classmethod
    def homogeneous(cls, region: Region) -> "DensitySpec":
        """Uniform probability density on the region (weights auto-normalized)."""
        w = 1.0 / region.volume
        return cls(region=region, weights=(w,) * len(region.boxes))

    @property
    def sup_norm(self) -> float:
        return max(self.weights)

    @property
    def box_masses(self) -> np.ndarray:
        return np.array([w * b.volume for w, b in zip(self.weights, self.region.boxes)])

    @property
    def total_mass(self) -> float:
        return float(self.box_masses.sum())


@dataclass(frozen=True)
class PointConfiguration:
    """Finite point set with deterministic (generation) order."""

    dimension: int
    points: np.ndarray  # (n, d) float64, read-only
    provenance: tuple[int, int] = (0, 0)

    def __post_init__(self):
        pts = np.ascontiguousarray(np.atleast_2d(np.asarray(self.points, dtype=float)))
        if pts.size == 0:
            pts = pts.reshape(0, self.dimension)
        if pts.shape[1] != self.dimension:
            raise ValueError(f"points have dimension {pts.shape[1]}, expected {self.dimension}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    @classmethod
    def from_points(cls, points, dimension: int | None = None) -> "PointConfiguration":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[0] == 1 and pts.shape[1] > 1 and dimension == 1:
            pts = pts.reshape(-1, 1)
        d = dimension if dimension is not None else pts.shape[1]
        return cls(dimension=d, points=pts)


def _uniform_in_box(rng: np.random.Generator, box: Box, n: int) -> np.ndarray:
    lo = np.asarray(box.lower)
    hi = np.asarray(box.upper)
    return rng.uniform(lo, hi, size=(n, len(lo)))


def sample_poisson_rng(density: DensitySpec, lam: float,
                       rng: np.random.Generator) -> np.ndarray:
    """Poisson sample drawn from an existing generator (points only)."""
    if not lam > 0.0:
        raise ValueError("lambda must be positive")
    parts = []
    for w, box in zip(density.weights, density.region.boxes):
        mean = lam * w * box.volume
        n = int(rng.poisson(mean)) if mean > 0.0 else 0
        parts.append(_uniform_in_box(rng, box, n))
    d = density.region.dimension
    if parts:
        return np.concatenate(parts, axis=0)
    return np.empty((0, d))


def sample_poisson(density: DensitySpec, lam: float,
                   seed: int, stream: int = 0) -> PointConfiguration:
    """Poisson point process with intensity lambda * density on the region."""
    rng = generator(seed, stream)
    pts = sample_poisson_rng(density, lam, rng)
    return PointConfiguration(dimension=density.region.dimension, points=pts,
                              provenance=(int(seed), int(stream)))


def sample_binomial(region: Region, n: int,
                    seed: int, stream: int = 0) -> PointConfiguration:
    """Exactly n i.i.d. uniform points on the region.

    The box of each point is chosen with probability proportional to volume,
    then the point is uniform within the box; output keeps box-major
    generation order.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    rng = generator(seed, stream)
    d = region.dimension
    if n == 0:
        return PointConfiguration(dimension=d, points=np.empty((0, d)),
                                  provenance=(int(seed), int(stream)))
    vols = np.array([b.volume for b in region.boxes])
    counts = rng.multinomial(n, vols / vols.sum())
    parts = [_uniform_in_box(rng, box, int(c))
             for box, c in zip(region.boxes, counts)]
    return PointConfiguration(dimension=d, points=np.concatenate(parts, axis=0),
                              provenance=(int(seed), int(stream)))


def sample_homogeneous_line(intensity: float, window: Box,
                            seed: int, stream: int = 0) -> PointConfiguration:
    """Homogeneous Poisson process of the given intensity on a 1-d window."""
    if window.dimension != 1:
        raise ValueError("homogeneous line sampling needs a 1-d window")
    if not intensity > 0.0:
        raise ValueError("intensity must be positive")
    rng = generator(seed, stream)
    length = window.upper[0] - window.lower[0]
    n = int(rng.poisson(intensity * length))
    pts = rng.uniform(window.lower[0], window.upper[0], size=(n, 1))
    return PointConfiguration(dimension=1, points=pts,
                              provenance=(int(seed), int(stream)))


def sample_location(density: DensitySpec, rng: np.random.Generator) -> np.ndarray:
    """One point distributed according to the (possibly unnormalized) density."""
    masses = density.box_masses
    probs = masses / masses.sum()
    idx = int(rng.choice(len(probs), p=probs))
    return _uniform_in_box(rng, density.region.boxes[idx], 1)[0]
