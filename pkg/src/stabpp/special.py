"""Closed-form asymptotic constants for power-weighted nearest-neighbour statistics.

For a nearest-neighbour (directed) graph on a point process on the line, with
edge weights d^alpha, the large-intensity limits of the scaled mean and variance
have explicit expressions in terms of the Euler Gamma function and the Gauss
hypergeometric series:

    mean coefficient     2^(-alpha) * Gamma(1 + alpha)
    variance constant    v_alpha(alpha)          (binomial / fixed-n case)
    Poisson excess       delta_alpha(alpha) = 2^(-alpha) * Gamma(1+alpha) * (1-alpha)

so the per-region limiting variance in the Poisson case is

    v_alpha * I + (delta_alpha * I)^2,   I = integral of the density over the region.

Everything here is a pure function of its float arguments; no state, safe for
concurrent use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "ConvergenceError",
    "PoleError",
    "gamma",
    "gauss_2f1",
    "v_alpha",
    "delta_alpha",
    "delta_alpha_sq",
    "exp_moment",
    "limiting_mean",
    "limiting_variance",
    "AsymptoticConstants",
]


class ConvergenceError(RuntimeError):
    """Series failed to converge within the term cap."""


class PoleError(ValueError):
    """Hypergeometric series hit a zero Pochhammer factor in the denominator."""


# Lanczos approximation, g = 7, 9 coefficients.  Relative accuracy is a few
# ulp over the range used here (positive reals up to ~30).
_LANCZOS_G = 7.0
_LANCZOS_COEFFS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def gamma(x: float) -> float:
    """Euler Gamma function for real x > 0 (Lanczos approximation)."""
    x = float(x)
    if not x > 0.0:
        raise ValueError(f"gamma requires x > 0, got {x}")
    if x < 0.5:
        # reflection keeps the Lanczos argument in its accurate range
        return math.pi / (math.sin(math.pi * x) * gamma(1.0 - x))
    z = x - 1.0
    acc = _LANCZOS_COEFFS[0]
    for i in range(1, len(_LANCZOS_COEFFS)):
        acc += _LANCZOS_COEFFS[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    return _SQRT_2PI * t ** (z + 0.5) * math.exp(-t) * acc


def _nonpositive_int(x: float) -> bool:
    return x <= 0.0 and x == math.floor(x)


def gauss_2f1(a: float, b: float, c: float, z: float,
              tol: float = 1e-13, max_terms: int = 10_000) -> float:
    """Gauss hypergeometric series 2F1(a, b; c; z) for |z| < 1.

    Direct term-by-term summation.  A terminating series (a or b a nonpositive
    integer) is summed exactly; otherwise summation stops once the term is
    below ``tol`` times the partial sum for 3 consecutive terms.  Raises
    PoleError if a zero denominator factor (c reaching a nonpositive integer)
    occurs before termination, and ConvergenceError past ``max_terms`` terms.
    """
    a, b, c, z = float(a), float(b), float(c), float(z)
    if not abs(z) < 1.0:
        raise ValueError(f"gauss_2f1 requires |z| < 1, got z={z}")

    total = 1.0
    term = 1.0
    quiet = 0
    for n in range(max_terms):
        fa, fb, fc = a + n, b + n, c + n
        if fa == 0.0 or fb == 0.0:
            return total  # terminating series: all later Pochhammer factors vanish
        if fc == 0.0:
            raise PoleError(
                f"gauss_2f1 pole: c={c} reaches a nonpositive integer at term {n + 1}"
            )
        term *= fa * fb / fc * z / (n + 1)
        total += term
        if abs(term) <= tol * abs(total):
            quiet += 1
            if quiet >= 3:
                return total
        else:
            quiet = 0
    raise ConvergenceError(
        f"gauss_2f1({a}, {b}; {c}; {z}) did not converge in {max_terms} terms"
    )


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not alpha > 0.0:
        raise ValueError(f"weight exponent must be > 0, got {alpha}")
    return alpha


def v_alpha(alpha: float) -> float:
    """Limiting scaled-variance constant of the fixed-n (binomial) case.

    v_alpha = (4^-a + 2*3^(-1-2a)) G(1+2a) - 4^-a (3+a^2) G(1+a)^2
              + 8 * 6^(-a-1) G(2+2a) / (1+a) * 2F1(-a, 1+a; 2+a; 1/3)

    For integer a the 2F1 factor terminates and the value is rational.
    """
    a = _check_alpha(alpha)
    g2a = gamma(1.0 + 2.0 * a)
    ga = gamma(1.0 + a)
    g22 = gamma(2.0 + 2.0 * a)
    hyp = gauss_2f1(-a, 1.0 + a, 2.0 + a, 1.0 / 3.0)
    return (
        (4.0 ** -a + 2.0 * 3.0 ** (-1.0 - 2.0 * a)) * g2a
        - 4.0 ** -a * (3.0 + a * a) * ga * ga
        + 8.0 * (6.0 ** (-a - 1.0) * g22 / (1.0 + a)) * hyp
    )


def delta_alpha(alpha: float) -> float:
    """Signed Poisson-excess coefficient 2^(-a) Gamma(1+a) (1-a); zero at a=1."""
    a = _check_alpha(alpha)
    return 2.0 ** -a * gamma(1.0 + a) * (1.0 - a)


def delta_alpha_sq(alpha: float) -> float:
    d = delta_alpha(alpha)
    return d * d


def exp_moment(alpha: float) -> float:
    """alpha-moment of the typical nearest-neighbour gap in a unit line process.

    The gap is Exp(2)-distributed, so E[D^a] = 2^(-a) Gamma(1+a).  Accepts
    alpha = 0 (returns 1).
    """
    a = float(alpha)
    if a == 0.0:
        return 1.0
    a = _check_alpha(a)
    return 2.0 ** -a * gamma(1.0 + a)


def limiting_mean(alpha: float, kappa_integral: float) -> float:
    """Limit of the scaled per-region mean: 2^(-a) Gamma(1+a) * integral."""
    a = _check_alpha(alpha)
    ki = float(kappa_integral)
    if ki < 0.0:
        raise ValueError(f"kappa integral must be >= 0, got {ki}")
    return 2.0 ** -a * gamma(1.0 + a) * ki


def limiting_variance(alpha: float, kappa_integral: float) -> float:
    """Limit of the scaled per-region variance in the Poisson case.

    sigma^2 = v_alpha * I + (delta_alpha * I)^2 with I the density integral
    over the region.
    """
    ki = float(kappa_integral)
    if ki < 0.0:
        raise ValueError(f"kappa integral must be >= 0, got {ki}")
    d = delta_alpha(alpha) * ki
    return v_alpha(alpha) * ki + d * d


@dataclass(frozen=True)
class AsymptoticConstants:
    """Bundle of the limiting constants for one weight exponent."""

    alpha: float
    v_alpha: float
    delta_alpha: float
    delta_alpha_sq: float
    limiting_mean_coeff: float

    @classmethod
    def for_alpha(cls, alpha: float) -> "AsymptoticConstants":
        a = _check_alpha(alpha)
        d = delta_alpha(a)
        return cls(
            alpha=a,
            v_alpha=v_alpha(a),
            delta_alpha=d,
            delta_alpha_sq=d * d,
            limiting_mean_coeff=exp_moment(a),
        )

    def sigma_sq(self, kappa_integral: float) -> float:
        """Per-region limiting variance for the given density integral."""
        d = self.delta_alpha * kappa_integral
        return self.v_alpha * kappa_integral + d * d
