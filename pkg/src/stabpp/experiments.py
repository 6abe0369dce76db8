"""Monte Carlo engine: replication, moment estimators, normality diagnostics.

A plan fixes the density, the disjoint regions with their test functions, the
functional family, a grid of intensities, and a replicate count.  Replicate r
of any intensity draws its configuration from stream r of the plan seed, so
results are independent of worker count and scheduling; failed replicates
(too few points) retry on reserved sub-streams and abort after 3 attempts.

Per intensity the engine reports, for each region, the sample mean and
unbiased variance of the statistic with standard errors (the variance SE via
the fourth-central-moment formula), the intensity-scaled mean and variance
with their limiting targets where known, the Kolmogorov distance of the
standardized component to the standard normal, the sup over a threshold grid
of |joint empirical CDF - product of normal CDFs| (the product-form
discrepancy), and the pairwise correlations of the standardized components.
A log-log fit of discrepancy against intensity estimates the convergence
rate, after censoring intensities whose discrepancy sits below the Monte
Carlo noise floor ~ 1/sqrt(replicates).
"""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import ndtr

from .functionals import (DIRECTED_NN, FunctionalSpec, InsufficientPointsError,
                          StatVector, TestFunctionSpec, t_vector)
from .neighbors import nn_distances
from .point_process import DensitySpec, sample_binomial, sample_poisson
from .regions import Region
from .special import delta_alpha, limiting_mean, limiting_variance

__all__ = [
    "DEFAULT_T_GRID",
    "ExperimentPlan",
    "EstimatorSummary",
    "JointDiscrepancy",
    "RegionStats",
    "LambdaReport",
    "ExperimentReport",
    "RateFit",
    "PoissonBinomialRow",
    "DegenerateComponentError",
    "GridBudgetError",
    "run_replicates",
    "estimate_moments",
    "standardize",
    "ks_to_normal",
    "product_form_discrepancy",
    "fit_rate",
    "run_experiment",
    "directed_nn_experiment",
    "compare_poisson_binomial",
    "kappa_integral",
]

DEFAULT_T_GRID = tuple(np.linspace(-3.0, 3.0, 13))

_RETRY_STREAM_BASE = 1 << 32
_BINOMIAL_STREAM_BASE = 1 << 36


class DegenerateComponentError(ValueError):
    """A component with zero sample variance cannot be standardized."""


class GridBudgetError(ValueError):
    """The full product grid exceeds the node budget; use a coarser grid."""


@dataclass(frozen=True)
class ExperimentPlan:
    """Everything needed to reproduce one family of Monte Carlo runs."""

    density: DensitySpec
    regions: tuple[Region, ...]
    test_functions: tuple[TestFunctionSpec, ...]
    functional: FunctionalSpec
    lambda_grid: tuple[float, ...]
    replicates: int
    seed: int
    t_grid: tuple[float, ...] = DEFAULT_T_GRID

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        object.__setattr__(self, "test_functions", tuple(self.test_functions))
        object.__setattr__(self, "lambda_grid",
                           tuple(float(v) for v in self.lambda_grid))
        object.__setattr__(self, "t_grid", tuple(float(v) for v in self.t_grid))
        if len(self.test_functions) != len(self.regions):
            raise ValueError("need one test function per region")
        for i in range(len(self.regions)):
            for j in range(i + 1, len(self.regions)):
                if not self.regions[i].disjoint_from(self.regions[j]):
                    raise ValueError(f"regions {i} and {j} overlap")
        if self.replicates < 2:
            raise ValueError("need at least 2 replicates")
        grid = self.lambda_grid
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("lambda grid must be strictly increasing")


def _one_replicate(plan: ExperimentPlan, lam: float, r: int) -> StatVector:
    spec = plan.functional.with_lambda(lam)
    streams = [r] + [_RETRY_STREAM_BASE + 4 * r + a for a in range(3)]
    last_err = None
    for s in streams:
        config = sample_poisson(plan.density, lam, plan.seed, stream=s)
        try:
            return t_vector(config, plan.test_functions, spec)
        except InsufficientPointsError as err:
            last_err = err
    raise RuntimeError(
        f"replicate {r} at lambda={lam} failed after 3 retries "
        f"(too few points for {plan.functional.family}): {last_err}")


def _replicate_chunk(args) -> list[np.ndarray]:
    plan, lam, indices = args
    return [_one_replicate(plan, lam, int(r)).values for r in indices]


def run_replicates(plan: ExperimentPlan, lam: float,
                   workers: int = 1) -> list[StatVector]:
    """All replicate statistic vectors for one intensity, in replicate order."""
    n = plan.replicates
    spec = plan.functional.with_lambda(lam)
    if workers <= 1:
        return [_one_replicate(plan, lam, r) for r in range(n)]
    chunks = [c for c in np.array_split(np.arange(n), 4 * workers) if len(c)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_replicate_chunk,
                              [(plan, lam, c) for c in chunks]))
    values = [v for chunk in parts for v in chunk]
    return [StatVector(values=v, lam=lam, spec=spec) for v in values]


@dataclass(frozen=True)
class EstimatorSummary:
    """Sample moments of the statistic vectors at one intensity."""

    n: int
    lam: float
    mean: np.ndarray
    var: np.ndarray            # unbiased
    cov: np.ndarray
    se_mean: np.ndarray
    se_var: np.ndarray         # fourth-central-moment formula
    scaled_mean: np.ndarray | None = None
    scaled_var: np.ndarray | None = None
    se_scaled_mean: np.ndarray | None = None
    se_scaled_var: np.ndarray | None = None


def _as_matrix(samples: Sequence[StatVector]) -> np.ndarray:
    return np.array([s.values for s in samples])


def estimate_moments(samples: Sequence[StatVector],
                     dimension: int | None = None) -> EstimatorSummary:
    """Mean vector, unbiased covariance, and standard errors of both.

    For the directed family in one dimension the intensity-scaled mean and
    variance (mean / lambda and var / lambda, matching the scaled statistic)
    are filled in as well.
    """
    n = len(samples)
    if n < 2:
        raise ValueError("need at least 2 samples")
    data = _as_matrix(samples)
    mean = data.mean(axis=0)
    centred = data - mean
    cov = centred.T @ centred / (n - 1)
    var = np.diag(cov).copy()  # shared computation keeps diagonal == variance exact
    m4 = np.mean(centred ** 4, axis=0)
    var_of_var = np.maximum(m4 - var ** 2 * (n - 3) / (n - 1), 0.0) / n
    se_mean = np.sqrt(var / n)
    se_var = np.sqrt(var_of_var)
    lam = samples[0].lam
    scaled = (samples[0].spec.family == DIRECTED_NN and dimension == 1)
    return EstimatorSummary(
        n=n, lam=lam, mean=mean, var=var, cov=cov,
        se_mean=se_mean, se_var=se_var,
        scaled_mean=mean / lam if scaled else None,
        scaled_var=var / lam if scaled else None,
        se_scaled_mean=se_mean / lam if scaled else None,
        se_scaled_var=se_var / lam if scaled else None,
    )


def standardize(samples: Sequence[StatVector],
                summary: EstimatorSummary) -> np.ndarray:
    """Componentwise (T - mean) / sqrt(var) using the sample estimates."""
    if np.any(summary.var <= 0.0):
        bad = int(np.argmin(summary.var))
        raise DegenerateComponentError(f"component {bad} has zero sample variance")
    data = _as_matrix(samples)
    return (data - summary.mean) / np.sqrt(summary.var)


def ks_to_normal(values) -> float:
    """Kolmogorov distance between the empirical CDF and the standard normal."""
    x = np.sort(np.asarray(values, dtype=float))
    n = len(x)
    if n == 0:
        raise ValueError("need at least one value")
    phi = ndtr(x)
    upper = np.arange(1, n + 1) / n - phi
    lower = phi - np.arange(0, n) / n
    return float(max(upper.max(), lower.max()))


@dataclass(frozen=True)
class JointDiscrepancy:
    """Sup over the threshold grid of |joint empirical CDF - product normal CDF|."""

    sup: float
    argmax_node: tuple[float, ...]


def product_form_discrepancy(standardized: np.ndarray,
                             t_grid: Sequence[float] | None = None,
                             budget: int = 100_000) -> JointDiscrepancy:
    """Product-form discrepancy of standardized samples on a full grid.

    The grid is the m-fold product of the per-axis thresholds (default 13
    points on [-3, 3]); the node count m * |grid|^m must stay within
    ``budget``.
    """
    std = np.asarray(standardized, dtype=float)
    if std.ndim == 1:
        std = std.reshape(-1, 1)
    if std.ndim != 2:
        raise ValueError("standardized samples must form an (n, m) array")
    n, m = std.shape
    grid = np.asarray(DEFAULT_T_GRID if t_grid is None else t_grid, dtype=float)
    g = len(grid)
    if g == 0:
        raise ValueError("threshold grid must be nonempty")
    if m * g ** m > budget:
        raise GridBudgetError(
            f"grid of {g}^{m} nodes exceeds the budget {budget}; use a coarser grid")
    ind = [(std[:, i][:, None] <= grid[None, :]).astype(float) for i in range(m)]
    if m == 1:
        cdf = ind[0].mean(axis=0)
    elif m == 2:
        cdf = ind[0].T @ ind[1] / n
    elif m == 3:
        cdf = np.einsum("na,nb,nc->abc", ind[0], ind[1], ind[2]) / n
    else:
        cdf = np.empty((g,) * m)
        for node in np.ndindex(*cdf.shape):
            ok = np.ones(n, dtype=bool)
            for axis, gi in enumerate(node):
                ok &= std[:, axis] <= grid[gi]
            cdf[node] = ok.mean()
    phi = ndtr(grid)
    prod = phi.copy()
    for _ in range(m - 1):
        prod = np.multiply.outer(prod, phi)
    diff = np.abs(cdf - prod)
    flat = int(np.argmax(diff))
    node = np.unravel_index(flat, diff.shape)
    return JointDiscrepancy(
        sup=float(diff[node]),
        argmax_node=tuple(float(grid[i]) for i in node),
    )


@dataclass(frozen=True)
class RateFit:
    """Least-squares fit of log discrepancy against log intensity."""

    slope: float
    intercept: float
    r_squared: float
    lambdas_used: tuple[float, ...]


def fit_rate(lambdas, discrepancies) -> RateFit:
    """Fit log D ~ slope * log lambda + intercept; zero discrepancies are dropped."""
    lams = np.asarray(lambdas, dtype=float)
    ds = np.asarray(discrepancies, dtype=float)
    keep = ds > 0.0
    if not keep.all():
        warnings.warn("dropping zero discrepancies from rate fit", stacklevel=2)
    lams, ds = lams[keep], ds[keep]
    if len(lams) < 3:
        raise ValueError("rate fit needs at least 3 positive (lambda, D) pairs")
    x = np.log(lams)
    y = np.log(ds)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0.0 else 1.0
    return RateFit(slope=float(slope), intercept=float(intercept), r_squared=r2,
                   lambdas_used=tuple(float(v) for v in lams))


# ---------------------------------------------------------------------------
# full experiment pipeline

@dataclass(frozen=True)
class RegionStats:
    index: int
    mean: float
    se_mean: float
    var: float
    se_var: float
    ks: float
    scaled_mean: float | None = None
    se_scaled_mean: float | None = None
    scaled_var: float | None = None
    se_scaled_var: float | None = None
    target_mean: float | None = None
    target_var: float | None = None


@dataclass(frozen=True)
class LambdaReport:
    lam: float
    regions: tuple[RegionStats, ...]
    joint_discrepancy: float
    argmax_node: tuple[float, ...]
    correlations: tuple[tuple[float, ...], ...]


@dataclass(frozen=True)
class ExperimentReport:
    plan: ExperimentPlan
    lambda_reports: tuple[LambdaReport, ...]
    rate: RateFit | None
    censored_lambdas: tuple[float, ...] = ()
    rate_note: str = ""

    def to_dict(self) -> dict:
        return {
            "functional": {
                "family": self.plan.functional.family,
                "k": self.plan.functional.k,
                "alpha": self.plan.functional.alpha,
            },
            "replicates": self.plan.replicates,
            "seed": self.plan.seed,
            "lambda_grid": list(self.plan.lambda_grid),
            "t_grid": list(self.plan.t_grid),
            "per_lambda": [
                {
                    "lambda": lr.lam,
                    "joint_discrepancy": lr.joint_discrepancy,
                    "argmax_node": list(lr.argmax_node),
                    "correlations": [list(row) for row in lr.correlations],
                    "regions": [
                        {
                            "index": rs.index,
                            "mean": rs.mean,
                            "se_mean": rs.se_mean,
                            "var": rs.var,
                            "se_var": rs.se_var,
                            "ks": rs.ks,
                            "scaled_mean": rs.scaled_mean,
                            "se_scaled_mean": rs.se_scaled_mean,
                            "scaled_var": rs.scaled_var,
                            "se_scaled_var": rs.se_scaled_var,
                            "target_mean": rs.target_mean,
                            "target_var": rs.target_var,
                        }
                        for rs in lr.regions
                    ],
                }
                for lr in self.lambda_reports
            ],
            "rate_fit": None if self.rate is None else {
                "slope": self.rate.slope,
                "intercept": self.rate.intercept,
                "r_squared": self.rate.r_squared,
                "lambdas_used": list(self.rate.lambdas_used),
            },
            "censored_lambdas": list(self.censored_lambdas),
            "rate_note": self.rate_note,
        }


def kappa_integral(density: DensitySpec, region: Region) -> float:
    """Integral of the piecewise-constant density over the region."""
    total = 0.0
    for w, dbox in zip(density.weights, density.region.boxes):
        for rbox in region.boxes:
            overlap = 1.0
            for dl, du, rl, ru in zip(dbox.lower, dbox.upper,
                                      rbox.lower, rbox.upper):
                overlap *= max(0.0, min(du, ru) - max(dl, rl))
            total += w * overlap
    return total


def _targets(plan: ExperimentPlan, index: int) -> tuple[float | None, float | None]:
    # explicit limits are known for the directed family on the line with an
    # indicator test function
    if (plan.functional.family != DIRECTED_NN
            or plan.density.region.dimension != 1
            or plan.test_functions[index].kind != "indicator"):
        return None, None
    integral = kappa_integral(plan.density, plan.regions[index])
    alpha = plan.functional.alpha
    return limiting_mean(alpha, integral), limiting_variance(alpha, integral)


def run_experiment(plan: ExperimentPlan, workers: int = 1,
                   progress=None) -> ExperimentReport:
    """Run the full lambda grid and assemble the per-intensity reports."""
    d = plan.density.region.dimension
    m = len(plan.regions)
    reports = []
    discrepancies = []
    for lam in plan.lambda_grid:
        samples = run_replicates(plan, lam, workers=workers)
        summary = estimate_moments(samples, dimension=d)
        std = standardize(samples, summary)
        corr = np.corrcoef(std, rowvar=False).reshape(m, m)
        joint = product_form_discrepancy(std, plan.t_grid)
        regions = []
        for i in range(m):
            tm, tv = _targets(plan, i)
            regions.append(RegionStats(
                index=i,
                mean=float(summary.mean[i]),
                se_mean=float(summary.se_mean[i]),
                var=float(summary.var[i]),
                se_var=float(summary.se_var[i]),
                ks=ks_to_normal(std[:, i]),
                scaled_mean=None if summary.scaled_mean is None else float(summary.scaled_mean[i]),
                se_scaled_mean=None if summary.se_scaled_mean is None else float(summary.se_scaled_mean[i]),
                scaled_var=None if summary.scaled_var is None else float(summary.scaled_var[i]),
                se_scaled_var=None if summary.se_scaled_var is None else float(summary.se_scaled_var[i]),
                target_mean=tm,
                target_var=tv,
            ))
        reports.append(LambdaReport(
            lam=lam, regions=tuple(regions),
            joint_discrepancy=joint.sup, argmax_node=joint.argmax_node,
            correlations=tuple(tuple(float(v) for v in row) for row in corr),
        ))
        discrepancies.append(joint.sup)
        if progress is not None:
            progress(lam, reports[-1])

    floor = 1.0 / np.sqrt(plan.replicates)
    keep = [i for i, dsc in enumerate(discrepancies) if dsc >= floor]
    censored = tuple(plan.lambda_grid[i] for i in range(len(discrepancies))
                     if i not in keep)
    rate = None
    note = ""
    if censored:
        warnings.warn(
            f"lambdas {list(censored)} censored from rate fit: discrepancy "
            f"below noise floor {floor:.4g}", stacklevel=2)
    if len(keep) >= 3:
        rate = fit_rate([plan.lambda_grid[i] for i in keep],
                        [discrepancies[i] for i in keep])
    else:
        note = (f"rate fit skipped: only {len(keep)} intensities above the "
                f"noise floor {floor:.4g}")
    return ExperimentReport(plan=plan, lambda_reports=tuple(reports),
                            rate=rate, censored_lambdas=censored, rate_note=note)


def directed_nn_experiment(alpha: float, kappas, intervals, lambda_grid,
                         replicates: int, seed: int, workers: int = 1,
                         t_grid=None, progress=None) -> ExperimentReport:
    """Directed nearest-neighbour verification run on disjoint intervals.

    ``kappas`` holds one positive constant density value per interval; the
    statistic per region is the intensity-scaled alpha-power edge length, so
    the scaled mean and variance converge to the closed-form limits reported
    next to each region.
    """
    intervals = [tuple(map(float, iv)) for iv in intervals]
    kappas = [float(k) for k in kappas]
    if len(kappas) != len(intervals):
        raise ValueError("need one density value per interval")
    if any(k <= 0 for k in kappas):
        raise ValueError("density values must be positive")
    regions = tuple(Region.interval(a, b) for a, b in intervals)
    support = Region.from_bounds([((a,), (b,)) for a, b in intervals])
    density = DensitySpec(region=support, weights=tuple(kappas), normalized=False)
    plan = ExperimentPlan(
        density=density,
        regions=regions,
        test_functions=tuple(TestFunctionSpec(region=r) for r in regions),
        functional=FunctionalSpec(family=DIRECTED_NN, k=1, alpha=float(alpha)),
        lambda_grid=tuple(lambda_grid),
        replicates=int(replicates),
        seed=int(seed),
        t_grid=tuple(DEFAULT_T_GRID if t_grid is None else t_grid),
    )
    return run_experiment(plan, workers=workers, progress=progress)


# ---------------------------------------------------------------------------
# Poisson versus binomial scaled variance

@dataclass(frozen=True)
class PoissonBinomialRow:
    alpha: float
    poisson_scaled_var: float
    poisson_se: float
    binomial_scaled_var: float
    binomial_se: float
    predicted_excess: float  # delta_alpha^2 * (density integral)^2

    @property
    def excess(self) -> float:
        return self.poisson_scaled_var - self.binomial_scaled_var

    @property
    def combined_se(self) -> float:
        return float(np.hypot(self.poisson_se, self.binomial_se))


def _scaled_var_rows(values: np.ndarray, scale: float) -> tuple[float, float]:
    n = len(values)
    mean = values.mean()
    centred = values - mean
    var = np.sum(centred ** 2) / (n - 1)
    m4 = np.mean(centred ** 4)
    var_of_var = max(m4 - var ** 2 * (n - 3) / (n - 1), 0.0) / n
    return float(scale * var), float(scale * np.sqrt(var_of_var))


def compare_poisson_binomial(alphas, lam: float, replicates: int,
                             seed: int) -> list[PoissonBinomialRow]:
    """Scaled variances of the region sum under Poisson(lam) and binomial(n=lam).

    Both processes live on the unit interval with unit density; the same
    replicate configurations are reused across the requested exponents.  The
    Poisson scaled variance should exceed the binomial one by the squared
    Poisson-excess coefficient.
    """
    alphas = [float(a) for a in alphas]
    region = Region.interval(0.0, 1.0)
    density = DensitySpec.homogeneous(region)
    n_points = int(round(lam))
    pois = {a: np.empty(replicates) for a in alphas}
    binom = {a: np.empty(replicates) for a in alphas}
    for r in range(replicates):
        cfg_p = sample_poisson(density, lam, seed, stream=r)
        while len(cfg_p) < 2:
            cfg_p = sample_poisson(density, lam, seed,
                                   stream=_RETRY_STREAM_BASE + r)
        cfg_b = sample_binomial(region, n_points, seed,
                                stream=_BINOMIAL_STREAM_BASE + r)
        # every point lies in the region, so the region sum is the plain sum;
        # the nearest-neighbour gaps are shared across exponents
        d_p = nn_distances(cfg_p.points)
        d_b = nn_distances(cfg_b.points)
        for a in alphas:
            pois[a][r] = float(np.sum(d_p ** a))
            binom[a][r] = float(np.sum(d_b ** a))
    rows = []
    for a in alphas:
        scale = lam ** (2.0 * a - 1.0)
        scale_b = float(n_points) ** (2.0 * a - 1.0)
        pv, pse = _scaled_var_rows(pois[a], scale)
        bv, bse = _scaled_var_rows(binom[a], scale_b)
        rows.append(PoissonBinomialRow(
            alpha=a, poisson_scaled_var=pv, poisson_se=pse,
            binomial_scaled_var=bv, binomial_se=bse,
            predicted_excess=delta_alpha(a) ** 2,
        ))
    return rows
